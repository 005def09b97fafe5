//! 5W1H metadata records for ingestion, processing and analysis.
//!
//! Records reference each other by their human-facing ids (`user_id`,
//! `dataset_id`, ...) and artifacts by [`BlobId`]. A record's identity in the
//! lake is the hash of its canonical bytes, see [`Record::record_id`].

pub mod canonical;
mod completeness;
mod timestamp;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::cas::{ArtifactKind, BlobId};
use crate::lineage::NodeKind;

pub use canonical::CanonicalError;
pub use completeness::{completeness_5w1h, CompletenessScore, Dimension};
pub use timestamp::Timestamp;
pub use validate::{validate_record, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRole {
    DataEngineer,
    DataScientist,
    DataAnalyst,
    BiProfessional,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub user_id: String,
    #[serde(default)]
    pub name: String,
    pub role: UserRole,
}

/// Free-form label. Case is preserved but comparison ignores it.
#[derive(Clone)]
pub struct Tag(String);

impl Tag {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn label(&self) -> &str {
        &self.0
    }

    pub fn is_well_formed(&self) -> bool {
        !self.0.is_empty() && self.0.trim() == self.0
    }

    pub fn matches(&self, other: &str) -> bool {
        self.0.to_lowercase() == other.to_lowercase()
    }
}

impl PartialEq for Tag {
    fn eq(&self, other: &Self) -> bool {
        self.matches(&other.0)
    }
}

impl Eq for Tag {}

impl std::hash::Hash for Tag {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_lowercase().hash(state)
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({:?})", self.0)
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer).map(Tag)
    }
}

/// Behaviour shared by external sources and lake datasets.
pub trait Dataset {
    fn dataset_name(&self) -> &str;
    fn dataset_description(&self) -> &str;
    fn dataset_created_at(&self) -> Option<&Timestamp>;
}

/// An external origin of data (file drop, database, API).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub source_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub source_type: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub owner: String,
    #[serde(default)]
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<Timestamp>,
}

impl Dataset for DatasetSource {
    fn dataset_name(&self) -> &str {
        &self.name
    }
    fn dataset_description(&self) -> &str {
        &self.description
    }
    fn dataset_created_at(&self) -> Option<&Timestamp> {
        self.created_at.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDescriptor {
    pub attribute_name: String,
    #[serde(default)]
    pub declared_type: String,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMetafeatures {
    pub n_rows: u64,
    pub n_attributes: u64,
    #[serde(default)]
    pub attributes: Vec<AttributeDescriptor>,
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaAttribute {
    pub name: String,
    #[serde(default)]
    pub declared_type: String,
}

/// A dataset version held in the lake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelLakeDataset {
    pub dataset_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub format: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<Tag>,
    #[serde(default)]
    pub attributes: Vec<SchemaAttribute>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<BlobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metafeatures: Option<DatasetMetafeatures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Earlier version of the same logical dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_version: Option<String>,
}

impl Dataset for ModelLakeDataset {
    fn dataset_name(&self) -> &str {
        &self.name
    }
    fn dataset_description(&self) -> &str {
        &self.description
    }
    fn dataset_created_at(&self) -> Option<&Timestamp> {
        self.created_at.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    Batch,
    Streaming,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestRecord {
    pub ingest_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<IngestMode>,
    #[serde(default)]
    pub comments: String,
    pub from_source: String,
    pub to_dataset: String,
    #[serde(default)]
    pub ingested_by: String,
    #[serde(default)]
    pub access_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingested_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Integration,
    Cleaning,
    Transformation,
    Reduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingOperation {
    pub op_kind: OperationKind,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
    pub order_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessRecord {
    pub process_id: String,
    #[serde(default)]
    pub name: String,
    /// The business purpose of the process.
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub language_program: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<BlobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_modified_at: Option<Timestamp>,
    #[serde(default)]
    pub source_datasets: Vec<String>,
    #[serde(default)]
    pub target_datasets: Vec<String>,
    #[serde(default)]
    pub operations: Vec<ProcessingOperation>,
    #[serde(default)]
    pub executed_by: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub env_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub runtime_descriptors: BTreeMap<String, String>,
    #[serde(default)]
    pub hardware: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Algorithm {
    pub name: String,
    #[serde(default)]
    pub family: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterType {
    Int,
    Float,
    String,
    Bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameter {
    pub name: String,
    pub value: String,
    pub value_type: ParameterType,
}

/// A project grouping analyses that share a subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Study {
    pub study_id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub study_type: String,
    #[serde(default)]
    pub member_analyses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub task_id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub task_type: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
    Full,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Validation => "validation",
            Self::Test => "test",
            Self::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsedDataset {
    pub dataset: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisRecord {
    pub analysis_id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub analysis_type: String,
    #[serde(default)]
    pub performed_by: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<BlobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<BlobId>,
    #[serde(default)]
    pub language_program: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub parameters: Vec<Parameter>,
    #[serde(default)]
    pub used_datasets: Vec<UsedDataset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_feature: Option<String>,
    #[serde(default)]
    pub performance: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performed_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_version: Option<String>,
}

/// Which record family a JSON document describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordType {
    User,
    Source,
    Dataset,
    Environment,
    Ingest,
    Process,
    Analysis,
    Study,
    Task,
}

impl RecordType {
    pub const ALL: [RecordType; 9] = [
        Self::User,
        Self::Source,
        Self::Dataset,
        Self::Environment,
        Self::Ingest,
        Self::Process,
        Self::Analysis,
        Self::Study,
        Self::Task,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::User => "user",
            Self::Source => "source",
            Self::Dataset => "dataset",
            Self::Environment => "environment",
            Self::Ingest => "ingest",
            Self::Process => "process",
            Self::Analysis => "analysis",
            Self::Study => "study",
            Self::Task => "task",
        }
    }

    pub fn node_kind(self) -> NodeKind {
        match self {
            Self::User => NodeKind::User,
            Self::Source => NodeKind::Source,
            Self::Dataset => NodeKind::Dataset,
            Self::Environment => NodeKind::Environment,
            Self::Ingest => NodeKind::Ingest,
            Self::Process => NodeKind::Process,
            Self::Analysis => NodeKind::Analysis,
            Self::Study => NodeKind::Study,
            Self::Task => NodeKind::Task,
        }
    }

    /// Name of the field carrying the human-facing id.
    pub fn id_field(self) -> &'static str {
        match self {
            Self::User => "user_id",
            Self::Source => "source_id",
            Self::Dataset => "dataset_id",
            Self::Environment => "env_id",
            Self::Ingest => "ingest_id",
            Self::Process => "process_id",
            Self::Analysis => "analysis_id",
            Self::Study => "study_id",
            Self::Task => "task_id",
        }
    }
}

impl fmt::Display for RecordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown record type '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    User(User),
    Source(DatasetSource),
    Dataset(ModelLakeDataset),
    Environment(Environment),
    Ingest(IngestRecord),
    Process(ProcessRecord),
    Analysis(AnalysisRecord),
    Study(Study),
    Task(TaskRecord),
}

impl Record {
    /// Parses a record of the given family. A top-level `record_id` member
    /// is accepted and discarded; any other unknown member is an error.
    pub fn from_json(record_type: RecordType, mut value: Value) -> Result<Self, serde_json::Error> {
        if let Value::Object(map) = &mut value {
            map.remove("record_id");
        }
        Ok(match record_type {
            RecordType::User => Self::User(serde_json::from_value(value)?),
            RecordType::Source => Self::Source(serde_json::from_value(value)?),
            RecordType::Dataset => Self::Dataset(serde_json::from_value(value)?),
            RecordType::Environment => Self::Environment(serde_json::from_value(value)?),
            RecordType::Ingest => Self::Ingest(serde_json::from_value(value)?),
            RecordType::Process => Self::Process(serde_json::from_value(value)?),
            RecordType::Analysis => Self::Analysis(serde_json::from_value(value)?),
            RecordType::Study => Self::Study(serde_json::from_value(value)?),
            RecordType::Task => Self::Task(serde_json::from_value(value)?),
        })
    }

    pub fn record_type(&self) -> RecordType {
        match self {
            Self::User(_) => RecordType::User,
            Self::Source(_) => RecordType::Source,
            Self::Dataset(_) => RecordType::Dataset,
            Self::Environment(_) => RecordType::Environment,
            Self::Ingest(_) => RecordType::Ingest,
            Self::Process(_) => RecordType::Process,
            Self::Analysis(_) => RecordType::Analysis,
            Self::Study(_) => RecordType::Study,
            Self::Task(_) => RecordType::Task,
        }
    }

    /// The human-facing id (`dataset_id`, `analysis_id`, ...).
    pub fn alias(&self) -> &str {
        match self {
            Self::User(r) => &r.user_id,
            Self::Source(r) => &r.source_id,
            Self::Dataset(r) => &r.dataset_id,
            Self::Environment(r) => &r.env_id,
            Self::Ingest(r) => &r.ingest_id,
            Self::Process(r) => &r.process_id,
            Self::Analysis(r) => &r.analysis_id,
            Self::Study(r) => &r.study_id,
            Self::Task(r) => &r.task_id,
        }
    }

    pub fn to_value(&self) -> Value {
        let v = match self {
            Self::User(r) => serde_json::to_value(r),
            Self::Source(r) => serde_json::to_value(r),
            Self::Dataset(r) => serde_json::to_value(r),
            Self::Environment(r) => serde_json::to_value(r),
            Self::Ingest(r) => serde_json::to_value(r),
            Self::Process(r) => serde_json::to_value(r),
            Self::Analysis(r) => serde_json::to_value(r),
            Self::Study(r) => serde_json::to_value(r),
            Self::Task(r) => serde_json::to_value(r),
        };
        v.expect("record types serialize infallibly")
    }

    /// First float field that is NaN or infinite, as a dotted path.
    pub fn non_finite_field(&self) -> Option<String> {
        let bad_map = |prefix: &str, m: &BTreeMap<String, f64>| {
            m.iter()
                .find(|(_, v)| !v.is_finite())
                .map(|(k, _)| format!("{prefix}.{k}"))
        };
        match self {
            Self::Analysis(a) => bad_map("performance", &a.performance),
            Self::Dataset(d) => d.metafeatures.as_ref().and_then(|m| {
                m.attributes
                    .iter()
                    .position(|a| !a.missing_fraction.is_finite())
                    .map(|i| format!("metafeatures.attributes[{i}].missing_fraction"))
                    .or_else(|| bad_map("metafeatures.extra", &m.extra))
            }),
            _ => None,
        }
    }

    /// Canonical JSON bytes of the record.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>, CanonicalError> {
        if let Some(field) = self.non_finite_field() {
            return Err(CanonicalError::NonFinite(field));
        }
        Ok(canonical::value_to_canonical_bytes(&self.to_value()))
    }

    /// `sha256:` + hex digest of the canonical bytes.
    pub fn record_id(&self) -> Result<String, CanonicalError> {
        if let Some(field) = self.non_finite_field() {
            return Err(CanonicalError::NonFinite(field));
        }
        Ok(canonical::content_id(&self.to_value()))
    }

    pub fn name(&self) -> &str {
        match self {
            Self::User(r) => &r.name,
            Self::Source(r) => &r.name,
            Self::Dataset(r) => &r.name,
            Self::Environment(r) => &r.name,
            Self::Process(r) => &r.name,
            Self::Ingest(_) | Self::Analysis(_) | Self::Study(_) | Self::Task(_) => self.alias(),
        }
    }

    pub fn description(&self) -> &str {
        match self {
            Self::Source(r) => &r.description,
            Self::Dataset(r) => &r.description,
            Self::Ingest(r) => &r.comments,
            Self::Process(r) => &r.description,
            Self::Analysis(r) => &r.description,
            Self::Study(r) => &r.description,
            Self::Task(r) => &r.description,
            Self::User(_) | Self::Environment(_) => "",
        }
    }

    pub fn tags(&self) -> &[Tag] {
        match self {
            Self::Dataset(r) => &r.tags,
            _ => &[],
        }
    }

    /// The user the record is attributed to, if any.
    pub fn user(&self) -> Option<&str> {
        let u = match self {
            Self::User(r) => &r.user_id,
            Self::Source(r) => &r.owner,
            Self::Ingest(r) => &r.ingested_by,
            Self::Process(r) => &r.executed_by,
            Self::Analysis(r) => &r.performed_by,
            _ => return None,
        };
        (!u.is_empty()).then_some(u.as_str())
    }

    /// The record's primary point in time.
    pub fn timestamp(&self) -> Option<&Timestamp> {
        match self {
            Self::Source(r) => r.created_at.as_ref(),
            Self::Dataset(r) => r.created_at.as_ref(),
            Self::Ingest(r) => r.ingested_at.as_ref(),
            Self::Process(r) => r.last_modified_at.as_ref().or(r.created_at.as_ref()),
            Self::Analysis(r) => r.performed_at.as_ref(),
            _ => None,
        }
        .filter(|t| t.is_valid())
    }
}

/// Lookup of referenced records and artifacts during validation and scoring.
pub trait Resolver {
    fn resolve(&self, record_type: RecordType, alias: &str) -> Option<&Record>;

    fn blob_kind(&self, id: &BlobId) -> Option<ArtifactKind>;

    fn user(&self, id: &str) -> Option<&User> {
        match self.resolve(RecordType::User, id)? {
            Record::User(u) => Some(u),
            _ => None,
        }
    }

    fn source(&self, id: &str) -> Option<&DatasetSource> {
        match self.resolve(RecordType::Source, id)? {
            Record::Source(s) => Some(s),
            _ => None,
        }
    }

    fn dataset(&self, id: &str) -> Option<&ModelLakeDataset> {
        match self.resolve(RecordType::Dataset, id)? {
            Record::Dataset(d) => Some(d),
            _ => None,
        }
    }

    fn analysis(&self, id: &str) -> Option<&AnalysisRecord> {
        match self.resolve(RecordType::Analysis, id)? {
            Record::Analysis(a) => Some(a),
            _ => None,
        }
    }
}

/// A plain in-memory [`Resolver`], handy for scoring records outside a lake.
#[derive(Debug, Default, Clone)]
pub struct RecordSet {
    records: HashMap<(RecordType, String), Record>,
    blobs: HashMap<BlobId, ArtifactKind>,
}

impl RecordSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: Record) -> &mut Self {
        self.records
            .insert((record.record_type(), record.alias().to_string()), record);
        self
    }

    pub fn insert_blob(&mut self, id: BlobId, kind: ArtifactKind) -> &mut Self {
        self.blobs.insert(id, kind);
        self
    }
}

impl Resolver for RecordSet {
    fn resolve(&self, record_type: RecordType, alias: &str) -> Option<&Record> {
        self.records.get(&(record_type, alias.to_string()))
    }

    fn blob_kind(&self, id: &BlobId) -> Option<ArtifactKind> {
        self.blobs.get(id).copied()
    }
}
