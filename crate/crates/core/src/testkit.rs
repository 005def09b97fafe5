//! Generators and brute-force oracles shared by the test suites.
//! Compiled only with the `testkit` feature.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::cas::{ArtifactKind, BlobId};
use crate::error::Result;
use crate::lake::Lake;
use crate::lineage::{EdgeKind, LineageEdge, LineageGraph, LineageNode, NodeClass, NodeKind};
use crate::model::{
    Algorithm, AnalysisRecord, DatasetSource, IngestMode, IngestRecord, ModelLakeDataset,
    OperationKind, Parameter, ParameterType, ProcessRecord, ProcessingOperation, Record, RecordSet,
    RecordType, Split, Timestamp, UsedDataset,
};

// ---------------------------------------------------------------------------
// Random DAGs

/// A random graph built through `LineageGraph::add_edge`, keeping only the
/// edges the graph accepted.
pub struct RandomDag {
    pub graph: LineageGraph,
    pub nodes: Vec<LineageNode>,
    pub edges: Vec<LineageEdge>,
}

/// Upstream end of an edge, spelled out independently of `EdgeKind`'s own
/// table. `None` for attribution.
fn oracle_upstream(e: &LineageEdge) -> Option<(&str, &str)> {
    match e.kind.as_str() {
        "attributed_to" => None,
        "ingest_to" | "generated_model" => Some((&e.from, &e.to)),
        _ => Some((&e.to, &e.from)),
    }
}

/// Candidate edge kinds that would make `up` an upstream of `down`.
fn candidates(up: &LineageNode, down: &LineageNode) -> Vec<LineageEdge> {
    EdgeKind::ALL
        .into_iter()
        .filter_map(|k| {
            if k.allows(down.node_kind, up.node_kind) {
                let e = LineageEdge::new(&down.node_id, &up.node_id, k);
                if k == EdgeKind::AttributedTo
                    || oracle_upstream(&e).is_some_and(|(u, _)| u == up.node_id)
                {
                    return Some(e);
                }
            }
            if k.allows(up.node_kind, down.node_kind) {
                let e = LineageEdge::new(&up.node_id, &down.node_id, k);
                if oracle_upstream(&e).is_some_and(|(u, _)| u == up.node_id) {
                    return Some(e);
                }
                if k == EdgeKind::AttributedTo {
                    return Some(e);
                }
            }
            None
        })
        .collect()
}

/// Nodes `n0..n{n}` with random kinds; edges only ever point from a lower
/// index upstream, so the generated graph is acyclic by construction.
pub fn random_dag<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> RandomDag {
    let n = rng.random_range(2..=max_nodes);
    let mut graph = LineageGraph::new();
    let nodes: Vec<LineageNode> = (0..n)
        .map(|i| {
            let kind = *NodeKind::ALL.choose(rng).expect("non-empty");
            LineageNode::new(format!("n{i:03}"), kind)
        })
        .collect();
    for node in &nodes {
        graph.add_node(node.clone()).expect("fresh ids");
    }
    let target = rng.random_range(0..=max_edges);
    let mut edges = Vec::new();
    let mut attempts = 0;
    while edges.len() < target && attempts < max_edges * 20 {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let (up, down) = (a.min(b), a.max(b));
        let cands = candidates(&nodes[up], &nodes[down]);
        let Some(edge) = cands.choose(rng) else {
            continue;
        };
        if matches!(graph.add_edge(edge.clone()), Ok(true)) {
            edges.push(edge.clone());
        }
    }
    RandomDag {
        graph,
        nodes,
        edges,
    }
}

/// Transitive closure by repeated boolean matrix squaring over the accepted
/// edges; no graph search involved.
pub struct ClosureOracle {
    ids: Vec<String>,
    class: Vec<NodeClass>,
    /// `reach[d][u]`: u is (transitively) upstream of d.
    reach: Vec<Vec<bool>>,
}

impl ClosureOracle {
    pub fn new(nodes: &[LineageNode], edges: &[LineageEdge]) -> Self {
        let ids: Vec<String> = nodes.iter().map(|n| n.node_id.clone()).collect();
        let pos: BTreeMap<&str, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let n = ids.len();
        let mut reach = vec![vec![false; n]; n];
        for e in edges {
            if let Some((u, d)) = oracle_upstream(e) {
                reach[pos[d]][pos[u]] = true;
            }
        }
        #[allow(clippy::needless_range_loop)]
        loop {
            let mut next = reach.clone();
            for i in 0..n {
                for k in 0..n {
                    if reach[i][k] {
                        for j in 0..n {
                            next[i][j] |= reach[k][j];
                        }
                    }
                }
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        Self {
            ids,
            class: nodes.iter().map(|n| n.node_class).collect(),
            reach,
        }
    }

    fn index(&self, id: &str) -> usize {
        self.ids.iter().position(|x| x == id).expect("known id")
    }

    pub fn is_upstream(&self, up: &str, of: &str) -> bool {
        self.reach[self.index(of)][self.index(up)]
    }

    fn collect(&self, f: impl Fn(usize) -> bool) -> Vec<String> {
        let mut v: Vec<String> = (0..self.ids.len())
            .filter(|&j| f(j) && self.class[j] != NodeClass::Agent)
            .map(|j| self.ids[j].clone())
            .collect();
        v.sort();
        v
    }

    pub fn upstream(&self, id: &str) -> Vec<String> {
        let i = self.index(id);
        self.collect(|j| j != i && self.reach[i][j])
    }

    pub fn downstream(&self, id: &str) -> Vec<String> {
        let i = self.index(id);
        self.collect(|j| j != i && self.reach[j][i])
    }
}

/// Outcome of checking one random DAG against the oracle.
#[derive(Debug, Default)]
pub struct DagCheck {
    pub nodes: usize,
    pub edges: usize,
    pub mismatches: Vec<String>,
}

pub fn check_dag<R: Rng>(rng: &mut R, max_nodes: usize, max_edges: usize) -> DagCheck {
    let RandomDag {
        mut graph,
        nodes,
        edges,
    } = random_dag(rng, max_nodes, max_edges);
    let oracle = ClosureOracle::new(&nodes, &edges);
    let mut out = DagCheck {
        nodes: nodes.len(),
        edges: edges.len(),
        mismatches: Vec::new(),
    };
    let ups: BTreeMap<&str, Vec<String>> = nodes
        .iter()
        .map(|n| {
            (
                n.node_id.as_str(),
                graph.upstream(&n.node_id).expect("known"),
            )
        })
        .collect();
    let downs: BTreeMap<&str, Vec<String>> = nodes
        .iter()
        .map(|n| {
            (
                n.node_id.as_str(),
                graph.downstream(&n.node_id).expect("known"),
            )
        })
        .collect();
    for n in &nodes {
        let id = n.node_id.as_str();
        if ups[id] != oracle.upstream(id) {
            out.mismatches.push(format!("upstream({id})"));
        }
        if downs[id] != oracle.downstream(id) {
            out.mismatches.push(format!("downstream({id})"));
        }
    }
    // Duality over every ordered pair.
    for a in &nodes {
        for b in &nodes {
            let a_up_b = ups[b.node_id.as_str()].contains(&a.node_id);
            let b_down_a = downs[a.node_id.as_str()].contains(&b.node_id);
            if a_up_b != b_down_a {
                out.mismatches
                    .push(format!("duality({}, {})", a.node_id, b.node_id));
            }
        }
    }
    // Closing any path into a loop must be refused without side effects.
    for _ in 0..20 {
        let a = rng.random_range(0..nodes.len());
        let b = rng.random_range(0..nodes.len());
        if a == b || !oracle.is_upstream(&nodes[a].node_id, &nodes[b].node_id) {
            continue;
        }
        // a is upstream of b; any dependency edge making b upstream of a closes a loop.
        for e in candidates(&nodes[b], &nodes[a]) {
            let before = (graph.node_count(), graph.edge_count());
            if graph.add_edge(e.clone()).is_ok() && oracle_upstream(&e).is_some() {
                out.mismatches.push(format!(
                    "cycle accepted: {} -> {} ({})",
                    e.from, e.to, e.kind
                ));
            }
            if oracle_upstream(&e).is_some() && (graph.node_count(), graph.edge_count()) != before {
                out.mismatches
                    .push("rejected edge changed the graph".into());
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// 5W1H matrix

#[derive(Debug, Clone)]
pub struct MatrixCase {
    pub family: RecordType,
    /// Bit i set ⇔ dimension `Dimension::ALL[i]` is populated.
    pub mask: u8,
    pub record: Record,
    pub resolver: RecordSet,
}

fn bit(mask: u8, i: usize) -> bool {
    mask & (1 << i) != 0
}

fn text(on: bool, s: &str) -> String {
    if on {
        s.to_string()
    } else {
        String::new()
    }
}

fn ts(on: bool) -> Option<Timestamp> {
    on.then(|| Timestamp::parse("2024-01-01T00:00:00Z").expect("valid"))
}

/// Every subset of the six dimensions for ingest, process and analysis
/// records: 3 × 64 cases.
pub fn completeness_matrix() -> Vec<MatrixCase> {
    let blob = BlobId::of(b"payload");
    let mut out = Vec::with_capacity(192);
    for mask in 0u8..64 {
        // Ingest: "what" depends on the resolved source and dataset.
        let mut resolver = RecordSet::new();
        resolver.insert(Record::Source(DatasetSource {
            source_id: "s".into(),
            name: "s".into(),
            source_type: String::new(),
            description: text(bit(mask, 0), "survey export"),
            owner: String::new(),
            location: String::new(),
            created_at: None,
        }));
        resolver.insert(Record::Dataset(ModelLakeDataset {
            dataset_id: "d".into(),
            name: "raw".into(),
            format: String::new(),
            description: String::new(),
            tags: vec![],
            attributes: vec![],
            location: bit(mask, 2).then(|| blob.clone()),
            created_at: None,
            metafeatures: None,
            source: None,
            previous_version: None,
        }));
        out.push(MatrixCase {
            family: RecordType::Ingest,
            mask,
            record: Record::Ingest(IngestRecord {
                ingest_id: "i".into(),
                mode: bit(mask, 5).then_some(IngestMode::Batch),
                comments: text(bit(mask, 4), "monthly refresh"),
                from_source: "s".into(),
                to_dataset: "d".into(),
                ingested_by: text(bit(mask, 1), "alice"),
                access_url: text(bit(mask, 2), "https://example.org/x"),
                ingested_at: ts(bit(mask, 3)),
                environment: bit(mask, 5).then(|| "env".to_string()),
            }),
            resolver,
        });

        out.push(MatrixCase {
            family: RecordType::Process,
            mask,
            record: Record::Process(ProcessRecord {
                process_id: "p".into(),
                name: text(bit(mask, 0), "clean"),
                description: text(bit(mask, 4), "drop bad rows"),
                language_program: text(bit(mask, 5), "python"),
                code: bit(mask, 2).then(|| blob.clone()),
                created_at: ts(bit(mask, 3)),
                last_modified_at: None,
                source_datasets: vec!["a".into()],
                target_datasets: vec!["b".into()],
                operations: if bit(mask, 5) {
                    vec![ProcessingOperation {
                        op_kind: OperationKind::Cleaning,
                        parameters: BTreeMap::new(),
                        order_index: 0,
                    }]
                } else {
                    vec![]
                },
                executed_by: text(bit(mask, 1), "alice"),
            }),
            resolver: RecordSet::new(),
        });

        out.push(MatrixCase {
            family: RecordType::Analysis,
            mask,
            record: Record::Analysis(analysis_for_mask(mask, &blob)),
            resolver: RecordSet::new(),
        });
    }
    out
}

fn analysis_for_mask(mask: u8, blob: &BlobId) -> AnalysisRecord {
    AnalysisRecord {
        analysis_id: "a".into(),
        description: text(bit(mask, 0), "predict onset"),
        analysis_type: String::new(),
        performed_by: text(bit(mask, 1), "bob"),
        study: bit(mask, 4).then(|| "s".to_string()),
        task: None,
        model_path: bit(mask, 2).then(|| blob.clone()),
        code: None,
        language_program: String::new(),
        environment: bit(mask, 5).then(|| "env".to_string()),
        algorithm: bit(mask, 5).then(|| Algorithm {
            name: "rf".into(),
            family: String::new(),
        }),
        parameters: if bit(mask, 5) {
            vec![Parameter {
                name: "k".into(),
                value: "1".into(),
                value_type: ParameterType::Int,
            }]
        } else {
            vec![]
        },
        used_datasets: vec![UsedDataset {
            dataset: "d".into(),
            split: Split::Train,
        }],
        target_feature: None,
        performance: BTreeMap::new(),
        performed_at: ts(bit(mask, 3)),
        previous_version: None,
    }
}

// ---------------------------------------------------------------------------
// Synthetic lakes

/// Registers the shared scaffolding (user, environment, study, source,
/// dataset) that synthetic analyses refer to.
pub fn scaffold(lake: &mut Lake) -> Result<()> {
    let (data, _) = lake.put_artifact(b"x,y\n1,0\n", ArtifactKind::Dataset)?;
    let records: [(RecordType, Value); 5] = [
        (
            RecordType::User,
            json!({"user_id": "u", "role": "data_scientist"}),
        ),
        (RecordType::Environment, json!({"env_id": "env"})),
        (
            RecordType::Study,
            json!({"study_id": "s", "description": "synthetic"}),
        ),
        (
            RecordType::Source,
            json!({"source_id": "src", "description": "synthetic source"}),
        ),
        (
            RecordType::Dataset,
            json!({"dataset_id": "d", "name": "d", "location": data.id.to_string()}),
        ),
    ];
    for (t, v) in records {
        lake.register_json(t, v)?;
    }
    Ok(())
}

/// One registered, model-producing analysis; `documented` decides whether
/// it answers all six questions (otherwise "why" is left open).
pub fn synthetic_analysis(lake: &mut Lake, i: usize, documented: bool) -> Result<String> {
    let (model, _) = lake.put_artifact(format!("model {i}").as_bytes(), ArtifactKind::Model)?;
    let (code, _) = lake.put_artifact(format!("fit({i})").as_bytes(), ArtifactKind::Code)?;
    let mut v = json!({
        "analysis_id": format!("a{i:05}"),
        "description": "synthetic analysis",
        "performed_by": "u",
        "model_path": model.id.to_string(),
        "code": code.id.to_string(),
        "environment": "env",
        "algorithm": {"name": "logreg"},
        "parameters": [{"name": "c", "value": "1.0", "value_type": "float"}],
        "used_datasets": [{"dataset": "d", "split": "train"}],
        "performed_at": "2024-01-01T00:00:00Z",
    });
    if documented {
        v["study"] = json!("s");
    }
    Ok(lake.register_json(RecordType::Analysis, v)?.node_id)
}

/// A lake holding `total` model-producing analyses of which the first
/// `documented` are fully documented.
pub fn swamp_lake(lake: &mut Lake, total: usize, documented: usize) -> Result<()> {
    scaffold(lake)?;
    for i in 0..total {
        synthetic_analysis(lake, i, i < documented)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Random records

/// A random record of a random family, as JSON, exercising unicode text,
/// floats, nested maps and optional members.
pub fn random_record<R: Rng>(rng: &mut R) -> (RecordType, Value) {
    fn word<R: Rng>(rng: &mut R) -> String {
        const PIECES: &[&str] = &[
            "a", "zeta", "Ω", "données", "☃", "\"q\"", "\\", "tab\t", "nl\n", "é", "𝄞", "\u{1}",
            "x y", "42", "",
        ];
        (0..rng.random_range(0..4))
            .map(|_| *PIECES.choose(rng).expect("non-empty"))
            .collect()
    }
    fn float<R: Rng>(rng: &mut R) -> f64 {
        match rng.random_range(0..4) {
            0 => rng.random::<f64>(),
            1 => rng.random_range(-1e9..1e9),
            2 => f64::from(rng.random_range(-5i32..5)),
            _ => rng.random::<f64>() * 10f64.powi(rng.random_range(-30..30)),
        }
    }
    fn stamp<R: Rng>(rng: &mut R) -> String {
        format!(
            "20{:02}-{:02}-{:02}T{:02}:{:02}:{:02}+0{}:00",
            rng.random_range(10..30),
            rng.random_range(1..13),
            rng.random_range(1..29),
            rng.random_range(0..24),
            rng.random_range(0..60),
            rng.random_range(0..60),
            rng.random_range(0..10),
        )
    }
    let blob = |rng: &mut R| BlobId::of(&rng.random::<[u8; 8]>()).to_string();
    let id = format!("r{}", rng.random::<u32>());
    match rng.random_range(0..5) {
        0 => (
            RecordType::Ingest,
            json!({
                "ingest_id": id, "comments": word(rng), "from_source": word(rng),
                "to_dataset": word(rng), "ingested_by": word(rng), "access_url": word(rng),
                "ingested_at": stamp(rng), "mode": "streaming"
            }),
        ),
        1 => {
            let perf: BTreeMap<String, f64> = (0..rng.random_range(0..4))
                .map(|_| (word(rng), float(rng)))
                .collect();
            (
                RecordType::Analysis,
                json!({
                    "analysis_id": id, "description": word(rng), "performed_by": word(rng),
                    "model_path": blob(rng), "performance": perf, "performed_at": stamp(rng),
                    "parameters": [{"name": word(rng), "value": word(rng), "value_type": "string"}],
                    "used_datasets": [{"dataset": word(rng), "split": "validation"}],
                    "algorithm": {"name": word(rng), "family": word(rng)}
                }),
            )
        }
        2 => (
            RecordType::Dataset,
            json!({
                "dataset_id": id, "name": word(rng), "tags": [word(rng) + "t"],
                "location": blob(rng),
                "metafeatures": {
                    "n_rows": rng.random::<u32>(), "n_attributes": rng.random_range(0..100),
                    "attributes": [{"attribute_name": word(rng), "missing_fraction": rng.random::<f64>()}],
                    "extra": {"skew": float(rng)}
                }
            }),
        ),
        3 => (
            RecordType::Process,
            json!({
                "process_id": id, "name": word(rng), "description": word(rng),
                "source_datasets": [word(rng)], "target_datasets": [word(rng) + "'"],
                "operations": [{"op_kind": "reduction", "order_index": rng.random_range(0..9),
                                "parameters": {word(rng): word(rng)}}],
                "created_at": stamp(rng)
            }),
        ),
        _ => (
            RecordType::Environment,
            json!({
                "env_id": id, "name": word(rng), "hardware": word(rng),
                "runtime_descriptors": {word(rng): word(rng), word(rng): word(rng)}
            }),
        ),
    }
}
