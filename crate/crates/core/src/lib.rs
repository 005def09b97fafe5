//! Model lake core: content-addressed artifact store, typed provenance
//! records, lineage graph, governance audits and catalog queries.

pub mod cas;
pub mod catalog;
pub mod demo;
pub mod error;
pub mod governance;
pub mod lake;
pub mod lineage;
pub mod log;
pub mod model;
pub mod stub_trainer;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use cas::{ArtifactKind, BlobId, BlobMeta, BlobStore, LocalStore, StoreError};
pub use error::{LakeError, Result};
pub use lake::{Lake, Registration};
