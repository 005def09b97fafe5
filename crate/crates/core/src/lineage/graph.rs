use std::collections::{BTreeSet, HashMap};

use super::{Dependency, EdgeKind, LineageBundle, LineageEdge, LineageNode, NodeClass, NodeKind};
use crate::model::Split;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("node '{0}' not found")]
    UnknownNode(String),
    #[error("node '{id}' already exists as {existing}, not {requested}")]
    KindConflict {
        id: String,
        existing: NodeKind,
        requested: NodeKind,
    },
    #[error("{kind} edge cannot connect {from_kind} '{from}' to {to_kind} '{to}'")]
    EdgeNotAllowed {
        kind: EdgeKind,
        from: String,
        from_kind: NodeKind,
        to: String,
        to_kind: NodeKind,
    },
    #[error("{kind} edge '{from}' -> '{to}' would create a cycle")]
    Cycle {
        kind: EdgeKind,
        from: String,
        to: String,
    },
    #[error("'{node}' already has a {direction} version ('{existing}')")]
    VersionBranch {
        node: String,
        direction: &'static str,
        existing: String,
    },
    #[error("'{target}' is already produced by '{existing}'")]
    SecondProducer { target: String, existing: String },
}

#[derive(Debug, Clone, Copy)]
struct Adj {
    node: usize,
    edge: usize,
}

/// The graph proper. Node and edge storage only ever grows; a failed batch
/// is rolled back before it becomes visible.
#[derive(Debug, Clone, Default)]
pub struct LineageGraph {
    nodes: Vec<LineageNode>,
    index: HashMap<String, usize>,
    edges: Vec<LineageEdge>,
    edge_index: HashMap<(usize, usize, EdgeKind, Option<Split>), usize>,
    // Dependency adjacency: `up[n]` lists what n depends on.
    up: Vec<Vec<Adj>>,
    down: Vec<Vec<Adj>>,
    // Every edge touching a node, including attribution.
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    version_prev: HashMap<usize, usize>,
    version_next: HashMap<usize, usize>,
    producer: HashMap<usize, usize>,
}

struct Checkpoint {
    nodes: usize,
    edges: usize,
}

impl LineageGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[LineageNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[LineageEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&LineageNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn idx(&self, id: &str) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    /// Adds a node; returns false if an identical node already exists.
    pub fn add_node(&mut self, node: LineageNode) -> Result<bool, GraphError> {
        if let Some(&i) = self.index.get(&node.node_id) {
            let existing = self.nodes[i].node_kind;
            if existing != node.node_kind {
                return Err(GraphError::KindConflict {
                    id: node.node_id,
                    existing,
                    requested: node.node_kind,
                });
            }
            return Ok(false);
        }
        let i = self.nodes.len();
        self.index.insert(node.node_id.clone(), i);
        self.nodes.push(node);
        self.up.push(Vec::new());
        self.down.push(Vec::new());
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        Ok(true)
    }

    /// Adds an edge after checking endpoint kinds, version linearity and
    /// acyclicity; returns false if the identical edge already exists.
    pub fn add_edge(&mut self, edge: LineageEdge) -> Result<bool, GraphError> {
        let from = self.idx(&edge.from)?;
        let to = self.idx(&edge.to)?;
        let (fk, tk) = (self.nodes[from].node_kind, self.nodes[to].node_kind);
        if !edge.kind.allows(fk, tk) {
            return Err(GraphError::EdgeNotAllowed {
                kind: edge.kind,
                from: edge.from,
                from_kind: fk,
                to: edge.to,
                to_kind: tk,
            });
        }
        if self
            .edge_index
            .contains_key(&(from, to, edge.kind, edge.split))
        {
            return Ok(false);
        }
        if edge.kind == EdgeKind::PreviousVersion {
            if let Some(&p) = self.version_prev.get(&from) {
                return Err(GraphError::VersionBranch {
                    node: edge.from,
                    direction: "previous",
                    existing: self.nodes[p].node_id.clone(),
                });
            }
            if let Some(&n) = self.version_next.get(&to) {
                return Err(GraphError::VersionBranch {
                    node: edge.to,
                    direction: "next",
                    existing: self.nodes[n].node_id.clone(),
                });
            }
        }
        let (upstream, downstream) = match edge.kind.dependency() {
            Dependency::ToIsUpstream => (Some(to), Some(from)),
            Dependency::FromIsUpstream => (Some(from), Some(to)),
            Dependency::Attribution => (None, None),
        };
        if edge.kind.is_production() {
            let output = downstream.expect("production edges are dependencies");
            if let Some(&p) = self.producer.get(&output) {
                if Some(p) != upstream {
                    return Err(GraphError::SecondProducer {
                        target: self.nodes[output].node_id.clone(),
                        existing: self.nodes[p].node_id.clone(),
                    });
                }
            }
        }
        if let (Some(u), Some(d)) = (upstream, downstream) {
            if u == d || self.reaches_up(u, d) {
                return Err(GraphError::Cycle {
                    kind: edge.kind,
                    from: edge.from,
                    to: edge.to,
                });
            }
        }

        let e = self.edges.len();
        self.edge_index.insert((from, to, edge.kind, edge.split), e);
        self.out_edges[from].push(e);
        self.in_edges[to].push(e);
        if let (Some(u), Some(d)) = (upstream, downstream) {
            self.up[d].push(Adj { node: u, edge: e });
            self.down[u].push(Adj { node: d, edge: e });
            if edge.kind.is_production() {
                self.producer.insert(d, u);
            }
        }
        if edge.kind == EdgeKind::PreviousVersion {
            self.version_prev.insert(from, to);
            self.version_next.insert(to, from);
        }
        self.edges.push(edge);
        Ok(true)
    }

    /// Whether `target` is in the upstream closure of `start`.
    fn reaches_up(&self, start: usize, target: usize) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(n) = stack.pop() {
            for a in &self.up[n] {
                if a.node == target {
                    return true;
                }
                if !seen[a.node] {
                    seen[a.node] = true;
                    stack.push(a.node);
                }
            }
        }
        false
    }

    /// Adds nodes then edges as one unit: on any error nothing is kept.
    /// Returns the number of nodes and edges actually added.
    pub fn apply_batch(
        &mut self,
        nodes: Vec<LineageNode>,
        edges: Vec<LineageEdge>,
    ) -> Result<(usize, usize), GraphError> {
        let cp = Checkpoint {
            nodes: self.nodes.len(),
            edges: self.edges.len(),
        };
        let result = (|| {
            for n in nodes {
                self.add_node(n)?;
            }
            for e in edges {
                self.add_edge(e)?;
            }
            Ok(())
        })();
        match result {
            Ok(()) => Ok((self.nodes.len() - cp.nodes, self.edges.len() - cp.edges)),
            Err(e) => {
                self.rollback(cp);
                Err(e)
            }
        }
    }

    /// Drops everything added after the given counts. Only valid for
    /// counts taken from this graph, before a sequence of additions.
    pub(crate) fn truncate(&mut self, nodes: usize, edges: usize) {
        self.rollback(Checkpoint { nodes, edges });
    }

    fn rollback(&mut self, cp: Checkpoint) {
        while self.edges.len() > cp.edges {
            let e = self.edges.len() - 1;
            let edge = self.edges.pop().expect("non-empty");
            let from = self.index[&edge.from];
            let to = self.index[&edge.to];
            self.edge_index.remove(&(from, to, edge.kind, edge.split));
            self.out_edges[from].pop();
            self.in_edges[to].pop();
            let (u, d) = match edge.kind.dependency() {
                Dependency::ToIsUpstream => (to, from),
                Dependency::FromIsUpstream => (from, to),
                Dependency::Attribution => continue,
            };
            debug_assert_eq!(self.up[d].last().map(|a| a.edge), Some(e));
            self.up[d].pop();
            self.down[u].pop();
            // A node has at most one production edge, so this one was it.
            if edge.kind.is_production() {
                self.producer.remove(&d);
            }
            if edge.kind == EdgeKind::PreviousVersion {
                self.version_prev.remove(&from);
                self.version_next.remove(&to);
            }
        }
        while self.nodes.len() > cp.nodes {
            let n = self.nodes.pop().expect("non-empty");
            self.index.remove(&n.node_id);
            self.up.pop();
            self.down.pop();
            self.out_edges.pop();
            self.in_edges.pop();
        }
    }

    fn closure(&self, start: usize, upward: bool, follow_versions: bool) -> Vec<usize> {
        let adj = if upward { &self.up } else { &self.down };
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        let mut out = Vec::new();
        seen[start] = true;
        while let Some(n) = stack.pop() {
            for a in &adj[n] {
                if !follow_versions && self.edges[a.edge].kind == EdgeKind::PreviousVersion {
                    continue;
                }
                if !seen[a.node] {
                    seen[a.node] = true;
                    out.push(a.node);
                    stack.push(a.node);
                }
            }
        }
        out
    }

    fn sorted_ids(&self, idxs: impl IntoIterator<Item = usize>) -> Vec<String> {
        let set: BTreeSet<&str> = idxs
            .into_iter()
            .filter(|&i| self.nodes[i].node_class != NodeClass::Agent)
            .map(|i| self.nodes[i].node_id.as_str())
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Everything `id` was derived from, excluding itself and agents,
    /// sorted by node id.
    pub fn upstream(&self, id: &str) -> Result<Vec<String>, GraphError> {
        let i = self.idx(id)?;
        Ok(self.sorted_ids(self.closure(i, true, true)))
    }

    /// Everything derived from `id`, excluding itself and agents.
    pub fn downstream(&self, id: &str) -> Result<Vec<String>, GraphError> {
        let i = self.idx(id)?;
        Ok(self.sorted_ids(self.closure(i, false, true)))
    }

    /// Upstream closure that does not step across `previous_version` links.
    pub fn upstream_within_version(&self, id: &str) -> Result<Vec<String>, GraphError> {
        let i = self.idx(id)?;
        Ok(self.sorted_ids(self.closure(i, true, false)))
    }

    /// Oldest-to-newest chain of `previous_version` links through `id`.
    pub fn version_chain(&self, id: &str) -> Result<Vec<String>, GraphError> {
        let mut i = self.idx(id)?;
        while let Some(&p) = self.version_prev.get(&i) {
            i = p;
        }
        let mut chain = vec![self.nodes[i].node_id.clone()];
        while let Some(&n) = self.version_next.get(&i) {
            i = n;
            chain.push(self.nodes[i].node_id.clone());
        }
        Ok(chain)
    }

    pub fn previous_version(&self, id: &str) -> Option<&str> {
        let i = *self.index.get(id)?;
        self.version_prev
            .get(&i)
            .map(|&p| self.nodes[p].node_id.as_str())
    }

    /// The activity that produced `id`, if any.
    pub fn producer(&self, id: &str) -> Option<&str> {
        let i = *self.index.get(id)?;
        self.producer
            .get(&i)
            .map(|&p| self.nodes[p].node_id.as_str())
    }

    /// Edges leaving `id`, optionally filtered by kind.
    pub fn outgoing(&self, id: &str, kind: Option<EdgeKind>) -> Vec<&LineageEdge> {
        self.index
            .get(id)
            .map(|&i| {
                self.out_edges[i]
                    .iter()
                    .map(|&e| &self.edges[e])
                    .filter(|e| kind.is_none_or(|k| e.kind == k))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Edges arriving at `id`, optionally filtered by kind.
    pub fn incoming(&self, id: &str, kind: Option<EdgeKind>) -> Vec<&LineageEdge> {
        self.index
            .get(id)
            .map(|&i| {
                self.in_edges[i]
                    .iter()
                    .map(|&e| &self.edges[e])
                    .filter(|e| kind.is_none_or(|k| e.kind == k))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// The focus, its upstream closure, and the agents attributed to any
    /// activity in it, with every edge among them.
    pub fn bundle(&self, focus: &str) -> Result<LineageBundle, GraphError> {
        let f = self.idx(focus)?;
        let mut members: BTreeSet<usize> = self.closure(f, true, true).into_iter().collect();
        members.insert(f);
        let agents: Vec<usize> = members
            .iter()
            .filter(|&&i| self.nodes[i].node_class == NodeClass::Activity)
            .flat_map(|&i| self.out_edges[i].iter())
            .filter(|&&e| self.edges[e].kind == EdgeKind::AttributedTo)
            .map(|&e| self.index[&self.edges[e].to])
            .collect();
        members.extend(agents);

        let mut bundle = LineageBundle {
            focus: focus.to_string(),
            upstream_entities: Vec::new(),
            activities: Vec::new(),
            agents: Vec::new(),
            environments: Vec::new(),
            edges: Vec::new(),
        };
        let mut ordered: Vec<usize> = members.iter().copied().collect();
        ordered.sort_by(|&a, &b| self.nodes[a].node_id.cmp(&self.nodes[b].node_id));
        for i in ordered {
            let node = self.nodes[i].clone();
            match (node.node_class, node.node_kind) {
                (_, NodeKind::Environment) => bundle.environments.push(node),
                (NodeClass::Entity, _) => bundle.upstream_entities.push(node),
                (NodeClass::Activity, _) => bundle.activities.push(node),
                (NodeClass::Agent, _) => bundle.agents.push(node),
            }
        }
        let mut edges: Vec<LineageEdge> = members
            .iter()
            .flat_map(|&i| self.out_edges[i].iter())
            .map(|&e| &self.edges[e])
            .filter(|e| members.contains(&self.index[&e.to]))
            .cloned()
            .collect();
        edges.sort();
        bundle.edges = edges;
        Ok(bundle)
    }
}
