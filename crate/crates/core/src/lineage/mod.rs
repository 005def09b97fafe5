//! Append-only provenance graph over entities, activities and agents.
//!
//! Edges are stored as registered (`from` → `to`), but every kind also has a
//! dependency direction used by traversals: "upstream" walks from a node to
//! what it was made from. `ingest_to` and `generated_model` point from the
//! producing activity to its output, so their upstream end is `from`;
//! `attributed_to` is attribution only and is never traversed. Every other
//! kind points at its upstream end.

mod diff;
mod graph;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::Split;

pub use diff::{diff_fields, flatten, pair_upstream, FieldChange, UpstreamChange, VersionDiff};
pub use graph::{GraphError, LineageGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Entity,
    Activity,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Dataset,
    Model,
    Code,
    Environment,
    Source,
    Ingest,
    Process,
    Analysis,
    User,
    Study,
    Task,
}

impl NodeKind {
    pub const ALL: [NodeKind; 11] = [
        Self::Dataset,
        Self::Model,
        Self::Code,
        Self::Environment,
        Self::Source,
        Self::Ingest,
        Self::Process,
        Self::Analysis,
        Self::User,
        Self::Study,
        Self::Task,
    ];

    pub fn class(self) -> NodeClass {
        match self {
            Self::Ingest | Self::Process | Self::Analysis => NodeClass::Activity,
            Self::User => NodeClass::Agent,
            _ => NodeClass::Entity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dataset => "dataset",
            Self::Model => "model",
            Self::Code => "code",
            Self::Environment => "environment",
            Self::Source => "source",
            Self::Ingest => "ingest",
            Self::Process => "process",
            Self::Analysis => "analysis",
            Self::User => "user",
            Self::Study => "study",
            Self::Task => "task",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown node kind '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineageNode {
    pub node_id: String,
    pub node_class: NodeClass,
    pub node_kind: NodeKind,
}

impl LineageNode {
    pub fn new(node_id: impl Into<String>, node_kind: NodeKind) -> Self {
        Self {
            node_id: node_id.into(),
            node_class: node_kind.class(),
            node_kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    IngestFrom,
    IngestTo,
    UsedData,
    GeneratedModel,
    UsedCode,
    AttributedTo,
    InEnvironment,
    MemberOfStudy,
    AddressesTask,
    PreviousVersion,
    DerivedFrom,
}

/// Which endpoint of an edge lies upstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependency {
    ToIsUpstream,
    FromIsUpstream,
    Attribution,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 11] = [
        Self::IngestFrom,
        Self::IngestTo,
        Self::UsedData,
        Self::GeneratedModel,
        Self::UsedCode,
        Self::AttributedTo,
        Self::InEnvironment,
        Self::MemberOfStudy,
        Self::AddressesTask,
        Self::PreviousVersion,
        Self::DerivedFrom,
    ];

    pub fn dependency(self) -> Dependency {
        match self {
            Self::IngestTo | Self::GeneratedModel => Dependency::FromIsUpstream,
            Self::AttributedTo => Dependency::Attribution,
            _ => Dependency::ToIsUpstream,
        }
    }

    /// Whether the edge kind may connect these endpoint kinds.
    pub fn allows(self, from: NodeKind, to: NodeKind) -> bool {
        use NodeKind as K;
        match self {
            Self::IngestFrom => from == K::Ingest && to == K::Source,
            Self::IngestTo => from == K::Ingest && to == K::Dataset,
            Self::UsedData => matches!(from, K::Process | K::Analysis) && to == K::Dataset,
            Self::GeneratedModel => from == K::Analysis && to == K::Model,
            Self::UsedCode => matches!(from, K::Process | K::Analysis) && to == K::Code,
            Self::AttributedTo => from.class() == NodeClass::Activity && to == K::User,
            Self::InEnvironment => from.class() == NodeClass::Activity && to == K::Environment,
            Self::MemberOfStudy => from == K::Analysis && to == K::Study,
            Self::AddressesTask => from == K::Analysis && to == K::Task,
            Self::PreviousVersion => from == to && from.class() != NodeClass::Agent,
            Self::DerivedFrom => from == K::Dataset && to == K::Process,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::IngestFrom => "ingest_from",
            Self::IngestTo => "ingest_to",
            Self::UsedData => "used_data",
            Self::GeneratedModel => "generated_model",
            Self::UsedCode => "used_code",
            Self::AttributedTo => "attributed_to",
            Self::InEnvironment => "in_environment",
            Self::MemberOfStudy => "member_of_study",
            Self::AddressesTask => "addresses_task",
            Self::PreviousVersion => "previous_version",
            Self::DerivedFrom => "derived_from",
        }
    }

    /// Edges that make `to` (or `from`) an output of an activity.
    pub fn is_production(self) -> bool {
        matches!(
            self,
            Self::IngestTo | Self::GeneratedModel | Self::DerivedFrom
        )
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineageEdge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    /// Data split, carried by `used_data` edges of analyses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl LineageEdge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, kind: EdgeKind) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            kind,
            split: None,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }
}

/// Upstream closure of one node, partitioned by role, plus the agents
/// attributed to its activities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageBundle {
    pub focus: String,
    pub upstream_entities: Vec<LineageNode>,
    pub activities: Vec<LineageNode>,
    pub agents: Vec<LineageNode>,
    pub environments: Vec<LineageNode>,
    pub edges: Vec<LineageEdge>,
}

impl LineageBundle {
    pub fn nodes(&self) -> impl Iterator<Item = &LineageNode> {
        self.upstream_entities
            .iter()
            .chain(&self.activities)
            .chain(&self.agents)
            .chain(&self.environments)
    }

    pub fn contains(&self, node_id: &str) -> bool {
        self.nodes().any(|n| n.node_id == node_id)
    }

    pub fn export(&self) -> LineageExport {
        LineageExport::new(
            self.focus.clone(),
            self.nodes().cloned(),
            self.edges.clone(),
        )
    }
}

/// Byte-stable `{focus, nodes, edges}` document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageExport {
    pub focus: String,
    pub nodes: Vec<LineageNode>,
    pub edges: Vec<LineageEdge>,
}

impl LineageExport {
    pub fn new(
        focus: String,
        nodes: impl IntoIterator<Item = LineageNode>,
        edges: impl IntoIterator<Item = LineageEdge>,
    ) -> Self {
        let mut nodes: Vec<_> = nodes.into_iter().collect();
        nodes.sort_by(|a, b| a.node_id.cmp(&b.node_id));
        nodes.dedup();
        let mut edges: Vec<_> = edges.into_iter().collect();
        edges.sort();
        edges.dedup();
        Self {
            focus,
            nodes,
            edges,
        }
    }

    /// Union of several exports under a new focus.
    pub fn merge(focus: String, parts: impl IntoIterator<Item = LineageExport>) -> Self {
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        for p in parts {
            nodes.extend(p.nodes);
            edges.extend(p.edges);
        }
        Self::new(focus, nodes, edges)
    }
}
