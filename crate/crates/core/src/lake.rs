//! The lake proper: record log + content store + lineage graph.
//!
//! Layout of a lake directory:
//!
//! ```text
//! records.jsonl   append-only record log
//! objects/        content-addressed blobs
//! tmp/            staging for atomic blob writes
//! lake.lock       held exclusively while the lake is open
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cas::{ArtifactKind, BlobId, BlobMeta, BlobStore, LocalStore};
use crate::error::{LakeError, Result};
use crate::lineage::{
    diff_fields, pair_upstream, EdgeKind, GraphError, LineageBundle, LineageEdge, LineageGraph,
    LineageNode, NodeKind, VersionDiff,
};
use crate::log::RecordLog;
use crate::model::{
    validate_record, AnalysisRecord, Record, RecordType, Resolver, ValidationReport,
};

const LOG_FILE: &str = "records.jsonl";
const LOCK_FILE: &str = "lake.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub node_id: String,
    pub created: bool,
}

#[derive(Debug)]
pub struct Lake {
    root: PathBuf,
    store: LocalStore,
    log: RecordLog,
    _lock: File,
    records: HashMap<String, Record>,
    aliases: HashMap<(RecordType, String), String>,
    order: Vec<String>,
    graph: LineageGraph,
}

impl Lake {
    /// Whether `root` holds an initialised lake.
    pub fn exists(root: &Path) -> bool {
        root.join(LOG_FILE).is_file()
    }

    /// Creates the lake if needed, then opens it.
    pub fn init(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        fs::create_dir_all(root)?;
        if !Self::exists(root) {
            File::create(root.join(LOG_FILE))?.sync_all()?;
        }
        Self::open(root)
    }

    /// Opens an existing lake and replays its log.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !Self::exists(&root) {
            return Err(LakeError::NotALake(root));
        }
        let lock = File::create(root.join(LOCK_FILE))?;
        lock.try_lock()
            .map_err(|_| LakeError::Locked(root.clone()))?;
        let store = LocalStore::open(&root)?;
        let (log, entries) = RecordLog::open(root.join(LOG_FILE))?;
        let mut lake = Self {
            root,
            store,
            log,
            _lock: lock,
            records: HashMap::new(),
            aliases: HashMap::new(),
            order: Vec::new(),
            graph: LineageGraph::new(),
        };
        for entry in entries {
            let line = entry.seq as usize + 1;
            let corrupt = |reason: String| LakeError::LogCorrupt { line, reason };
            let record = Record::from_json(entry.record_type, entry.record)
                .map_err(|e| corrupt(e.to_string()))?;
            let node_id = record.record_id().map_err(|e| corrupt(e.to_string()))?;
            if lake.records.contains_key(&node_id) {
                continue;
            }
            lake.commit(record, node_id, false)
                .map_err(|e| corrupt(e.to_string()))?;
        }
        tracing::debug!(records = lake.order.len(), "lake replayed");
        Ok(lake)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn store(&self) -> &LocalStore {
        &self.store
    }

    pub fn graph(&self) -> &LineageGraph {
        &self.graph
    }

    /// Number of committed log entries.
    pub fn log_len(&self) -> u64 {
        self.log.len()
    }

    pub fn record_count(&self) -> usize {
        self.order.len()
    }

    /// Records in registration order, with their node ids.
    pub fn records(&self) -> impl Iterator<Item = (&str, &Record)> {
        self.order.iter().map(|id| (id.as_str(), &self.records[id]))
    }

    pub fn record(&self, node_id: &str) -> Option<&Record> {
        self.records.get(node_id)
    }

    pub fn node_for(&self, record_type: RecordType, alias: &str) -> Option<&str> {
        self.aliases
            .get(&(record_type, alias.to_string()))
            .map(String::as_str)
    }

    pub fn put_artifact(&self, payload: &[u8], kind: ArtifactKind) -> Result<(BlobMeta, bool)> {
        Ok(self.store.put_blob_meta(payload, kind)?)
    }

    pub fn get_artifact(&self, id: &BlobId) -> Result<Vec<u8>> {
        Ok(self.store.get_blob(id)?)
    }

    pub fn artifact_meta(&self, id: &BlobId) -> Result<BlobMeta> {
        Ok(self.store.blob_meta(id)?)
    }

    /// Parses, validates and registers one JSON record.
    pub fn register_json(&mut self, record_type: RecordType, value: Value) -> Result<Registration> {
        let record = Record::from_json(record_type, value)
            .map_err(|e| LakeError::Malformed(e.to_string()))?;
        self.register(record)
    }

    /// Validates and registers a record. Re-registering identical content
    /// is a no-op that reports `created: false`.
    pub fn register(&mut self, record: Record) -> Result<Registration> {
        if let Some(field) = record.non_finite_field() {
            let mut report = ValidationReport::default();
            report.push(field, "finite", "value must be a finite number");
            return Err(LakeError::Validation(report));
        }
        let node_id = record.record_id()?;
        if self.records.contains_key(&node_id) {
            return Ok(Registration {
                node_id,
                created: false,
            });
        }
        let report = validate_record(&record, self);
        if !report.is_empty() {
            return Err(LakeError::Validation(report));
        }
        self.commit(record, node_id, true)
    }

    fn commit(&mut self, record: Record, node_id: String, durable: bool) -> Result<Registration> {
        let rt = record.record_type();
        let key = (rt, record.alias().to_string());
        if let Some(existing) = self.aliases.get(&key) {
            return Err(LakeError::Conflict(format!(
                "{rt} '{}' already registered with different content ({existing})",
                key.1
            )));
        }
        let (nodes, edges) = self.plan(&record, &node_id)?;
        let (n0, e0) = (self.graph.node_count(), self.graph.edge_count());
        self.graph.apply_batch(nodes, edges).map_err(graph_error)?;
        if durable {
            if let Err(e) = self.log.append(rt, record.to_value()) {
                self.graph.truncate(n0, e0);
                return Err(e);
            }
        }
        self.aliases.insert(key, node_id.clone());
        self.records.insert(node_id.clone(), record);
        self.order.push(node_id.clone());
        Ok(Registration {
            node_id,
            created: true,
        })
    }

    fn node_of(&self, record_type: RecordType, alias: &str) -> Result<String> {
        self.node_for(record_type, alias)
            .map(str::to_string)
            .ok_or_else(|| LakeError::NotFound(format!("{record_type} '{alias}'")))
    }

    /// Nodes and edges a record adds to the graph.
    fn plan(&self, record: &Record, id: &str) -> Result<(Vec<LineageNode>, Vec<LineageEdge>)> {
        let mut nodes = vec![LineageNode::new(id, record.record_type().node_kind())];
        let mut edges = Vec::new();
        let attribute = |edges: &mut Vec<LineageEdge>, user: &str| -> Result<()> {
            if !user.is_empty() {
                edges.push(LineageEdge::new(
                    id,
                    self.node_of(RecordType::User, user)?,
                    EdgeKind::AttributedTo,
                ));
            }
            Ok(())
        };
        match record {
            Record::User(_) | Record::Source(_) | Record::Environment(_) | Record::Task(_) => {}
            Record::Dataset(d) => {
                if let Some(prev) = &d.previous_version {
                    edges.push(LineageEdge::new(
                        id,
                        self.node_of(RecordType::Dataset, prev)?,
                        EdgeKind::PreviousVersion,
                    ));
                }
            }
            Record::Ingest(r) => {
                edges.push(LineageEdge::new(
                    id,
                    self.node_of(RecordType::Source, &r.from_source)?,
                    EdgeKind::IngestFrom,
                ));
                edges.push(LineageEdge::new(
                    id,
                    self.node_of(RecordType::Dataset, &r.to_dataset)?,
                    EdgeKind::IngestTo,
                ));
                if let Some(env) = &r.environment {
                    edges.push(LineageEdge::new(
                        id,
                        self.node_of(RecordType::Environment, env)?,
                        EdgeKind::InEnvironment,
                    ));
                }
                attribute(&mut edges, &r.ingested_by)?;
            }
            Record::Process(p) => {
                for s in &p.source_datasets {
                    edges.push(LineageEdge::new(
                        id,
                        self.node_of(RecordType::Dataset, s)?,
                        EdgeKind::UsedData,
                    ));
                }
                for t in &p.target_datasets {
                    edges.push(LineageEdge::new(
                        self.node_of(RecordType::Dataset, t)?,
                        id,
                        EdgeKind::DerivedFrom,
                    ));
                }
                if let Some(code) = &p.code {
                    nodes.push(LineageNode::new(code.to_string(), NodeKind::Code));
                    edges.push(LineageEdge::new(id, code.to_string(), EdgeKind::UsedCode));
                }
                attribute(&mut edges, &p.executed_by)?;
            }
            Record::Analysis(a) => self.plan_analysis(a, id, &mut nodes, &mut edges)?,
            Record::Study(s) => {
                for member in &s.member_analyses {
                    let analysis = self.node_of(RecordType::Analysis, member)?;
                    self.check_single_study(&analysis, id)?;
                    edges.push(LineageEdge::new(analysis, id, EdgeKind::MemberOfStudy));
                }
            }
        }
        if let Record::Analysis(a) = record {
            attribute(&mut edges, &a.performed_by)?;
        }
        Ok((nodes, edges))
    }

    fn plan_analysis(
        &self,
        a: &AnalysisRecord,
        id: &str,
        nodes: &mut Vec<LineageNode>,
        edges: &mut Vec<LineageEdge>,
    ) -> Result<()> {
        for u in &a.used_datasets {
            edges.push(
                LineageEdge::new(
                    id,
                    self.node_of(RecordType::Dataset, &u.dataset)?,
                    EdgeKind::UsedData,
                )
                .with_split(u.split),
            );
        }
        if let Some(model) = &a.model_path {
            nodes.push(LineageNode::new(model.to_string(), NodeKind::Model));
            edges.push(LineageEdge::new(
                id,
                model.to_string(),
                EdgeKind::GeneratedModel,
            ));
        }
        if let Some(code) = &a.code {
            nodes.push(LineageNode::new(code.to_string(), NodeKind::Code));
            edges.push(LineageEdge::new(id, code.to_string(), EdgeKind::UsedCode));
        }
        if let Some(env) = &a.environment {
            edges.push(LineageEdge::new(
                id,
                self.node_of(RecordType::Environment, env)?,
                EdgeKind::InEnvironment,
            ));
        }
        if let Some(study) = &a.study {
            let s = self.node_of(RecordType::Study, study)?;
            edges.push(LineageEdge::new(id, s, EdgeKind::MemberOfStudy));
        }
        if let Some(task) = &a.task {
            edges.push(LineageEdge::new(
                id,
                self.node_of(RecordType::Task, task)?,
                EdgeKind::AddressesTask,
            ));
        }
        if let Some(prev) = &a.previous_version {
            let prev_id = self.node_of(RecordType::Analysis, prev)?;
            let prev_model = self
                .graph
                .outgoing(&prev_id, Some(EdgeKind::GeneratedModel))
                .first()
                .map(|e| e.to.clone());
            edges.push(LineageEdge::new(id, prev_id, EdgeKind::PreviousVersion));
            if let (Some(model), Some(pm)) = (&a.model_path, prev_model) {
                if model.to_string() != pm {
                    edges.push(LineageEdge::new(
                        model.to_string(),
                        pm,
                        EdgeKind::PreviousVersion,
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_single_study(&self, analysis: &str, study: &str) -> Result<()> {
        match self
            .graph
            .outgoing(analysis, Some(EdgeKind::MemberOfStudy))
            .first()
        {
            Some(e) if e.to != study => Err(LakeError::Conflict(format!(
                "analysis '{analysis}' already belongs to study '{}'",
                e.to
            ))),
            _ => Ok(()),
        }
    }

    /// Resolves a node reference: a node id, a `type:alias` pair, or a bare
    /// alias that is unique across record types.
    pub fn resolve_node(&self, reference: &str) -> Result<&LineageNode> {
        if let Some(n) = self.graph.node(reference) {
            return Ok(n);
        }
        if let Some((prefix, alias)) = reference.split_once(':') {
            if let Ok(rt) = prefix.parse::<RecordType>() {
                let id = self.node_of(rt, alias)?;
                return Ok(self.graph.node(&id).expect("registered records are nodes"));
            }
        }
        let hits: Vec<&String> = RecordType::ALL
            .iter()
            .filter_map(|&rt| self.aliases.get(&(rt, reference.to_string())))
            .collect();
        match hits.as_slice() {
            [] => Err(LakeError::NotFound(format!("node '{reference}'"))),
            [id] => Ok(self.graph.node(id).expect("registered records are nodes")),
            _ => Err(LakeError::InvalidQuery(format!(
                "'{reference}' names several records; use type:alias or a node id"
            ))),
        }
    }

    pub fn upstream(&self, reference: &str) -> Result<Vec<String>> {
        let id = self.resolve_node(reference)?.node_id.clone();
        self.graph.upstream(&id).map_err(graph_error)
    }

    pub fn downstream(&self, reference: &str) -> Result<Vec<String>> {
        let id = self.resolve_node(reference)?.node_id.clone();
        self.graph.downstream(&id).map_err(graph_error)
    }

    pub fn version_chain(&self, reference: &str) -> Result<Vec<String>> {
        let id = self.resolve_node(reference)?.node_id.clone();
        self.graph.version_chain(&id).map_err(graph_error)
    }

    pub fn lineage(&self, reference: &str) -> Result<LineageBundle> {
        let id = self.resolve_node(reference)?.node_id.clone();
        self.graph.bundle(&id).map_err(graph_error)
    }

    /// Lineage bundle of a model node; any other kind is rejected.
    pub fn model_lineage(&self, reference: &str) -> Result<LineageBundle> {
        let node = self.resolve_node(reference)?;
        if node.node_kind != NodeKind::Model {
            return Err(LakeError::KindMismatch {
                id: node.node_id.clone(),
                expected: NodeKind::Model.to_string(),
                actual: node.node_kind,
            });
        }
        self.graph.bundle(&node.node_id).map_err(graph_error)
    }

    /// The analysis that generated a model node.
    pub fn producing_analysis(&self, model_id: &str) -> Option<&AnalysisRecord> {
        match self.records.get(self.graph.producer(model_id)?)? {
            Record::Analysis(a) => Some(a),
            _ => None,
        }
    }

    /// JSON view of a node: the record for record nodes, the store
    /// metadata for blob nodes.
    pub fn node_value(&self, node_id: &str) -> Result<Value> {
        if let Some(r) = self.records.get(node_id) {
            return Ok(r.to_value());
        }
        let id: BlobId = node_id
            .parse()
            .map_err(|_| LakeError::NotFound(format!("node '{node_id}'")))?;
        let meta = self.store.blob_meta(&id)?;
        Ok(json!({"kind": meta.kind, "size_bytes": meta.size_bytes}))
    }

    /// Field and upstream differences between two nodes of the same kind.
    pub fn diff_versions(&self, a: &str, b: &str) -> Result<VersionDiff> {
        let na = self.resolve_node(a)?.clone();
        let nb = self.resolve_node(b)?.clone();
        if na.node_kind != nb.node_kind {
            return Err(LakeError::InvalidQuery(format!(
                "cannot diff a {} against a {}",
                na.node_kind, nb.node_kind
            )));
        }
        let mut ignored = vec!["previous_version", "model_path"];
        if let Some(r) = self.records.get(&na.node_id) {
            ignored.push(r.record_type().id_field());
        }
        let changed_fields = diff_fields(
            &self.node_value(&na.node_id)?,
            &self.node_value(&nb.node_id)?,
            &ignored,
        );
        let closure = |id: &str| -> Result<BTreeSet<String>> {
            let mut s: BTreeSet<String> = self
                .graph
                .upstream_within_version(id)
                .map_err(graph_error)?
                .into_iter()
                .collect();
            s.remove(&na.node_id);
            s.remove(&nb.node_id);
            Ok(s)
        };
        let (ua, ub) = (closure(&na.node_id)?, closure(&nb.node_id)?);
        let only_a = ua.difference(&ub).cloned().collect();
        let only_b = ub.difference(&ua).cloned().collect();
        Ok(VersionDiff {
            a: na.node_id,
            b: nb.node_id,
            changed_fields,
            changed_upstream: pair_upstream(&self.graph, &only_a, &only_b),
        })
    }
}

impl Resolver for Lake {
    fn resolve(&self, record_type: RecordType, alias: &str) -> Option<&Record> {
        self.records.get(self.node_for(record_type, alias)?)
    }

    fn blob_kind(&self, id: &BlobId) -> Option<ArtifactKind> {
        self.store.blob_meta(id).ok().map(|m| m.kind)
    }
}

fn graph_error(e: GraphError) -> LakeError {
    let mut report = ValidationReport::default();
    match &e {
        GraphError::Cycle { .. } => report.push("lineage", "acyclic", e.to_string()),
        GraphError::EdgeNotAllowed { .. } => report.push("lineage", "edge_kind", e.to_string()),
        GraphError::UnknownNode(id) => {
            return LakeError::NotFound(format!("node '{id}'"));
        }
        GraphError::KindConflict { .. }
        | GraphError::VersionBranch { .. }
        | GraphError::SecondProducer { .. } => return LakeError::Conflict(e.to_string()),
    }
    LakeError::Validation(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn lake() -> (tempfile::TempDir, Lake) {
        let dir = tempfile::tempdir().unwrap();
        let lake = Lake::init(dir.path().join("lake")).unwrap();
        (dir, lake)
    }

    #[test]
    fn idempotent_and_conflicting_registration() {
        let (_d, mut lake) = lake();
        let a = lake
            .register_json(
                RecordType::User,
                json!({"user_id": "alice", "name": "Alice", "role": "data_scientist"}),
            )
            .unwrap();
        assert!(a.created);
        let again = lake
            .register_json(
                RecordType::User,
                json!({"role": "data_scientist", "name": "Alice", "user_id": "alice"}),
            )
            .unwrap();
        assert_eq!(
            again,
            Registration {
                created: false,
                ..a.clone()
            }
        );
        let err = lake
            .register_json(
                RecordType::User,
                json!({"user_id": "alice", "name": "Al", "role": "data_scientist"}),
            )
            .unwrap_err();
        assert_eq!(err.code(), "conflict");
        assert_eq!(lake.log_len(), 1);
    }

    #[test]
    fn second_open_is_locked() {
        let (d, lake) = lake();
        assert!(matches!(
            Lake::open(d.path().join("lake")),
            Err(LakeError::Locked(_))
        ));
        drop(lake);
        Lake::open(d.path().join("lake")).unwrap();
    }

    #[test]
    fn replay_restores_graph() {
        let (d, mut lake) = lake();
        lake.register_json(RecordType::Source, json!({"source_id": "s"}))
            .unwrap();
        let (blob, _) = lake
            .put_artifact(b"a,b\n1,2\n", ArtifactKind::Dataset)
            .unwrap();
        lake.register_json(
            RecordType::Dataset,
            json!({"dataset_id": "d1", "location": blob.id.to_string()}),
        )
        .unwrap();
        lake.register_json(
            RecordType::User,
            json!({"user_id": "u", "role": "data_engineer"}),
        )
        .unwrap();
        let ing = lake
            .register_json(
                RecordType::Ingest,
                json!({"ingest_id": "i", "from_source": "s", "to_dataset": "d1",
                       "ingested_by": "u", "ingested_at": "2024-01-01T00:00:00Z"}),
            )
            .unwrap();
        let up = lake.upstream("d1").unwrap();
        let edges = lake.graph().edge_count();
        drop(lake);
        let lake = Lake::open(d.path().join("lake")).unwrap();
        assert_eq!(lake.upstream("dataset:d1").unwrap(), up);
        assert!(up.contains(&ing.node_id));
        assert_eq!(lake.graph().edge_count(), edges);
    }

    #[test]
    fn opening_a_plain_directory_fails() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(Lake::open(d.path()), Err(LakeError::NotALake(_))));
    }
}
