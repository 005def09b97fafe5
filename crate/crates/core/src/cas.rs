//! Content-addressed blob storage.
//!
//! Every physical artifact (dataset files, model files, program source,
//! environment descriptors, reports) is stored once under the SHA-256 of its
//! bytes. The on-disk layout is
//!
//! ```text
//! <root>/objects/<2 hex>/<2 hex>/<60 hex>            payload
//! <root>/objects/<2 hex>/<2 hex>/<60 hex>.meta.json  sidecar (BlobMeta)
//! <root>/tmp/                                        staging for atomic renames
//! ```
//!
//! Payloads and sidecars are written to `tmp/` and renamed into place, so a
//! reader never observes a partially written object.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::model::Timestamp;

const OBJECTS_DIR: &str = "objects";
const TMP_DIR: &str = "tmp";
const META_SUFFIX: &str = ".meta.json";

/// Identifier of an immutable payload: `sha256:<64 lowercase hex>`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlobId {
    digest: String,
}

impl BlobId {
    pub const ALGORITHM: &'static str = "sha256";

    /// Hashes `payload` and returns its id.
    pub fn of(payload: &[u8]) -> Self {
        Self {
            digest: hex::encode(Sha256::digest(payload)),
        }
    }

    pub fn from_digest(digest: &str) -> Result<Self, ParseBlobIdError> {
        if digest.len() == 64
            && digest
                .bytes()
                .all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
        {
            Ok(Self {
                digest: digest.to_string(),
            })
        } else {
            Err(ParseBlobIdError(digest.to_string()))
        }
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    fn relative_path(&self) -> PathBuf {
        let d = &self.digest;
        PathBuf::from(&d[0..2]).join(&d[2..4]).join(&d[4..])
    }
}

impl fmt::Display for BlobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", Self::ALGORITHM, self.digest)
    }
}

impl fmt::Debug for BlobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlobId({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid blob id '{0}': expected sha256:<64 lowercase hex>")]
pub struct ParseBlobIdError(String);

impl FromStr for BlobId {
    type Err = ParseBlobIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((Self::ALGORITHM, digest)) => {
                Self::from_digest(digest).map_err(|_| ParseBlobIdError(s.to_string()))
            }
            _ => Err(ParseBlobIdError(s.to_string())),
        }
    }
}

impl Serialize for BlobId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BlobId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What a stored payload is. Bound at first write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Dataset,
    Model,
    Code,
    Environment,
    Report,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 5] = [
        Self::Dataset,
        Self::Model,
        Self::Code,
        Self::Environment,
        Self::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dataset => "dataset",
            Self::Model => "model",
            Self::Code => "code",
            Self::Environment => "environment",
            Self::Report => "report",
        }
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown artifact kind '{0}'")]
pub struct ParseKindError(pub String);

impl FromStr for ArtifactKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ParseKindError(s.to_string()))
    }
}

/// Sidecar metadata stored next to every payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobMeta {
    pub id: BlobId,
    pub kind: ArtifactKind,
    pub size_bytes: u64,
    pub stored_at: Timestamp,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("blob {0} not found")]
    NotFound(BlobId),
    #[error("blob {0} is corrupt: stored bytes do not hash to its id")]
    Corrupt(BlobId),
    #[error("blob {id} already stored as {existing}, refusing to re-store it as {requested}")]
    KindConflict {
        id: BlobId,
        existing: ArtifactKind,
        requested: ArtifactKind,
    },
    #[error("store scan incomplete after {} corrupt blob(s): {source}", partial.len())]
    ScanIncomplete {
        partial: Vec<BlobId>,
        #[source]
        source: io::Error,
    },
    #[error("blob {id} has unreadable metadata: {reason}")]
    BadMeta { id: BlobId, reason: String },
    #[error("store write failed: {0}")]
    Write(#[source] io::Error),
    #[error("store read failed: {0}")]
    Read(#[source] io::Error),
}

/// Storage boundary for artifact payloads. Only [`LocalStore`] ships; the
/// trait is where a remote backend would plug in.
pub trait BlobStore: Send + Sync {
    fn put_blob(&self, payload: &[u8], kind: ArtifactKind) -> Result<BlobId, StoreError> {
        self.put_blob_meta(payload, kind).map(|(meta, _)| meta.id)
    }

    /// Like [`BlobStore::put_blob`], also returning the sidecar and whether
    /// this call created the blob.
    fn put_blob_meta(
        &self,
        payload: &[u8],
        kind: ArtifactKind,
    ) -> Result<(BlobMeta, bool), StoreError>;

    fn get_blob(&self, id: &BlobId) -> Result<Vec<u8>, StoreError>;

    fn has_blob(&self, id: &BlobId) -> bool;

    fn blob_meta(&self, id: &BlobId) -> Result<BlobMeta, StoreError>;

    /// Re-hashes every payload and returns the ids that no longer match.
    fn verify_store(&self) -> Result<Vec<BlobId>, StoreError>;
}

/// Filesystem-backed store using the `objects/aa/bb/<rest>` layout.
#[derive(Debug)]
pub struct LocalStore {
    root: PathBuf,
    tmp_counter: AtomicU64,
}

impl LocalStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join(OBJECTS_DIR))?;
        fs::create_dir_all(root.join(TMP_DIR))?;
        Ok(Self {
            root,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn object_path(&self, id: &BlobId) -> PathBuf {
        self.root.join(OBJECTS_DIR).join(id.relative_path())
    }

    fn meta_path(&self, id: &BlobId) -> PathBuf {
        let mut p = self.object_path(id).into_os_string();
        p.push(META_SUFFIX);
        PathBuf::from(p)
    }

    /// Total bytes under `objects/`, payloads and sidecars included.
    pub fn disk_usage(&self) -> io::Result<u64> {
        let mut total = 0;
        for entry in self.walk_objects()? {
            total += fs::metadata(entry?)?.len();
        }
        Ok(total)
    }

    /// Every stored blob id, sorted.
    pub fn list_blobs(&self) -> io::Result<Vec<BlobId>> {
        let mut ids = Vec::new();
        for path in self.walk_objects()? {
            if let Some(id) = self.id_from_payload_path(&path?) {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn id_from_payload_path(&self, path: &Path) -> Option<BlobId> {
        let name = path.file_name()?.to_str()?;
        if name.ends_with(META_SUFFIX) {
            return None;
        }
        let b = path.parent()?;
        let a = b.parent()?;
        let digest = format!(
            "{}{}{}",
            a.file_name()?.to_str()?,
            b.file_name()?.to_str()?,
            name
        );
        BlobId::from_digest(&digest).ok()
    }

    fn walk_objects(&self) -> io::Result<impl Iterator<Item = io::Result<PathBuf>>> {
        let mut files = Vec::new();
        let objects = self.root.join(OBJECTS_DIR);
        for a in sorted_dir(&objects)? {
            if !a.is_dir() {
                continue;
            }
            for b in sorted_dir(&a)? {
                if !b.is_dir() {
                    continue;
                }
                for f in sorted_dir(&b)? {
                    files.push(Ok(f));
                }
            }
        }
        Ok(files.into_iter())
    }

    fn write_atomically(&self, dest: &Path, bytes: &[u8]) -> io::Result<()> {
        let tmp = self.root.join(TMP_DIR).join(format!(
            "{}-{}.tmp",
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let result = (|| {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            drop(f);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(&tmp, dest)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result
    }

    fn read_meta(&self, id: &BlobId) -> Result<Option<BlobMeta>, StoreError> {
        let bytes = match fs::read(self.meta_path(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(StoreError::Read(e)),
        };
        let meta: BlobMeta = serde_json::from_slice(&bytes).map_err(|e| StoreError::BadMeta {
            id: id.clone(),
            reason: e.to_string(),
        })?;
        if &meta.id != id {
            return Err(StoreError::BadMeta {
                id: id.clone(),
                reason: format!("sidecar names {}", meta.id),
            });
        }
        Ok(Some(meta))
    }
}

fn sorted_dir(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

impl BlobStore for LocalStore {
    fn put_blob_meta(
        &self,
        payload: &[u8],
        kind: ArtifactKind,
    ) -> Result<(BlobMeta, bool), StoreError> {
        let id = BlobId::of(payload);
        if let Some(existing) = self.read_meta(&id)? {
            if existing.kind != kind {
                return Err(StoreError::KindConflict {
                    id,
                    existing: existing.kind,
                    requested: kind,
                });
            }
            if self.object_path(&id).is_file() {
                return Ok((existing, false));
            }
        }
        self.write_atomically(&self.object_path(&id), payload)
            .map_err(StoreError::Write)?;
        let meta = BlobMeta {
            id: id.clone(),
            kind,
            size_bytes: payload.len() as u64,
            stored_at: Timestamp::now(),
        };
        let sidecar = crate::model::canonical::to_canonical_bytes(&meta)
            .expect("blob metadata has no floats");
        self.write_atomically(&self.meta_path(&id), &sidecar)
            .map_err(StoreError::Write)?;
        Ok((meta, true))
    }

    fn get_blob(&self, id: &BlobId) -> Result<Vec<u8>, StoreError> {
        let mut file = match File::open(self.object_path(id)) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.clone()))
            }
            Err(e) => return Err(StoreError::Read(e)),
        };
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(StoreError::Read)?;
        if BlobId::of(&bytes) != *id {
            return Err(StoreError::Corrupt(id.clone()));
        }
        Ok(bytes)
    }

    fn has_blob(&self, id: &BlobId) -> bool {
        self.object_path(id).is_file() && self.meta_path(id).is_file()
    }

    fn blob_meta(&self, id: &BlobId) -> Result<BlobMeta, StoreError> {
        self.read_meta(id)?
            .filter(|_| self.object_path(id).is_file())
            .ok_or_else(|| StoreError::NotFound(id.clone()))
    }

    fn verify_store(&self) -> Result<Vec<BlobId>, StoreError> {
        let mut corrupt = Vec::new();
        let ids = self
            .list_blobs()
            .map_err(|source| StoreError::ScanIncomplete {
                partial: Vec::new(),
                source,
            })?;
        for id in ids {
            match fs::read(self.object_path(&id)) {
                Ok(bytes) => {
                    if BlobId::of(&bytes) != id {
                        corrupt.push(id);
                    }
                }
                Err(source) => {
                    return Err(StoreError::ScanIncomplete {
                        partial: corrupt,
                        source,
                    })
                }
            }
        }
        Ok(corrupt)
    }
}
