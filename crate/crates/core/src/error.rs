use std::io;
use std::path::PathBuf;

use crate::cas::StoreError;
use crate::lineage::NodeKind;
use crate::model::{CanonicalError, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum LakeError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("validation failed: {0}")]
    Validation(ValidationReport),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("'{id}' is a {actual} node, expected {expected}")]
    KindMismatch {
        id: String,
        expected: String,
        actual: NodeKind,
    },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("no lake at {0}; run init first")]
    NotALake(PathBuf),
    #[error("lake at {0} is locked by another process")]
    Locked(PathBuf),
    #[error("record log corrupt at line {line}: {reason}")]
    LogCorrupt { line: usize, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl LakeError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NotFound(_) | Self::Store(StoreError::NotFound(_)) => "not_found",
            Self::Validation(_) | Self::Canonical(CanonicalError::NonFinite(_)) => {
                "validation_failed"
            }
            Self::Conflict(_) | Self::Store(StoreError::KindConflict { .. }) => "conflict",
            Self::KindMismatch { .. } => "kind_mismatch",
            Self::InvalidQuery(_) => "invalid_query",
            Self::Malformed(_) => "malformed_json",
            _ => "internal",
        }
    }

    pub fn violations(&self) -> Option<&ValidationReport> {
        match self {
            Self::Validation(r) => Some(r),
            _ => None,
        }
    }
}

pub type Result<T, E = LakeError> = std::result::Result<T, E>;
