//! Search over registered records and the per-study project view.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cas::BlobId;
use crate::error::{LakeError, Result};
use crate::lake::Lake;
use crate::lineage::{EdgeKind, LineageExport, NodeKind};
use crate::model::{
    completeness_5w1h, Algorithm, ModelLakeDataset, Parameter, Record, RecordType, Study, Timestamp,
};

pub const DEFAULT_LIMIT: usize = 20;
const SNIPPET_CHARS: usize = 120;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kinds: Vec<NodeKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[serde(default)]
    pub offset: usize,
}

impl SearchQuery {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: Some(text.into()),
            ..Self::default()
        }
    }

    fn terms(&self) -> Vec<String> {
        self.text
            .as_deref()
            .unwrap_or("")
            .split_whitespace()
            .map(str::to_lowercase)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let has_text = !self.terms().is_empty();
        if !has_text
            && self.kinds.is_empty()
            && self.tags.is_empty()
            && self.user.is_none()
            && self.from.is_none()
            && self.to.is_none()
        {
            return Err(LakeError::InvalidQuery("query has no criteria".into()));
        }
        if self.limit == Some(0) {
            return Err(LakeError::InvalidQuery("limit must be positive".into()));
        }
        for (name, ts) in [("from", &self.from), ("to", &self.to)] {
            if ts.as_ref().is_some_and(|t| !t.is_valid()) {
                return Err(LakeError::InvalidQuery(format!(
                    "{name} is not an RFC 3339 timestamp"
                )));
            }
        }
        if let (Some(f), Some(t)) = (&self.from, &self.to) {
            if f > t {
                return Err(LakeError::InvalidQuery("from is after to".into()));
            }
        }
        Ok(())
    }

    /// Match score of a record, or None if it fails any criterion.
    pub fn score(&self, kind: NodeKind, record: &Record) -> Option<u32> {
        if !self.kinds.is_empty() && !self.kinds.contains(&kind) {
            return None;
        }
        if !self
            .tags
            .iter()
            .all(|t| record.tags().iter().any(|rt| rt.matches(t)))
        {
            return None;
        }
        if let Some(u) = &self.user {
            if record.user() != Some(u.as_str()) {
                return None;
            }
        }
        if self.from.is_some() || self.to.is_some() {
            let ts = record.timestamp()?;
            if self.from.as_ref().is_some_and(|f| ts < f)
                || self.to.as_ref().is_some_and(|t| ts > t)
            {
                return None;
            }
        }
        let terms = self.terms();
        if terms.is_empty() {
            return Some(0);
        }
        let name = record.name().to_lowercase();
        let description = record.description().to_lowercase();
        let tags: Vec<String> = record
            .tags()
            .iter()
            .map(|t| t.label().to_lowercase())
            .collect();
        let score: u32 = terms
            .iter()
            .map(|t| {
                u32::from(name.contains(t.as_str()))
                    + u32::from(description.contains(t.as_str()))
                    + u32::from(tags.iter().any(|g| g.contains(t.as_str())))
            })
            .sum();
        (score > 0).then_some(score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub node_id: String,
    pub node_kind: NodeKind,
    pub name: String,
    pub snippet: String,
    pub score: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<Timestamp>,
}

fn snippet(text: &str) -> String {
    match text.char_indices().nth(SNIPPET_CHARS) {
        Some((i, _)) => format!("{}…", &text[..i]),
        None => text.to_string(),
    }
}

/// Ranked by score, then most recent timestamp (undated last), then node id.
pub fn search(lake: &Lake, q: &SearchQuery) -> Result<Vec<SearchHit>> {
    q.validate()?;
    let mut hits: Vec<SearchHit> = lake
        .records()
        .filter_map(|(id, r)| {
            let kind = r.record_type().node_kind();
            q.score(kind, r).map(|score| SearchHit {
                node_id: id.to_string(),
                node_kind: kind,
                name: r.name().to_string(),
                snippet: snippet(r.description()),
                score,
                timestamp: r.timestamp().cloned(),
            })
        })
        .collect();
    hits.sort_by(|a, b| {
        (Reverse(a.score), Reverse(&a.timestamp), &a.node_id).cmp(&(
            Reverse(b.score),
            Reverse(&b.timestamp),
            &b.node_id,
        ))
    });
    Ok(hits
        .into_iter()
        .skip(q.offset)
        .take(q.limit.unwrap_or(DEFAULT_LIMIT))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub node_id: String,
    pub dataset: ModelLakeDataset,
    pub version_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub analysis: String,
    pub analysis_id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    pub parameters: Vec<Parameter>,
    pub performance: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<BlobId>,
    pub completeness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectView {
    pub study: Study,
    pub dataset_section: Vec<DatasetEntry>,
    pub model_section: Vec<ModelEntry>,
    pub lineage_section: LineageExport,
}

pub fn get_project_view(lake: &Lake, study_id: &str) -> Result<ProjectView> {
    let study_node = lake
        .node_for(RecordType::Study, study_id)
        .ok_or_else(|| LakeError::NotFound(format!("study '{study_id}'")))?
        .to_string();
    let Some(Record::Study(study)) = lake.record(&study_node) else {
        unreachable!("study aliases point at study records");
    };
    let graph = lake.graph();

    let mut members: Vec<_> = graph
        .incoming(&study_node, Some(EdgeKind::MemberOfStudy))
        .into_iter()
        .filter_map(|e| match lake.record(&e.from) {
            Some(Record::Analysis(a)) => Some((e.from.clone(), a)),
            _ => None,
        })
        .collect();
    members.sort_by(|x, y| x.1.analysis_id.cmp(&y.1.analysis_id));
    members.dedup_by(|x, y| x.0 == y.0);

    // Newest version of each dataset chain touched by a member analysis.
    let mut chains: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (_, a) in &members {
        for u in &a.used_datasets {
            if let Some(id) = lake.node_for(RecordType::Dataset, &u.dataset) {
                let chain = lake.version_chain(id)?;
                chains.insert(chain[0].clone(), chain);
            }
        }
    }
    let mut dataset_section: Vec<DatasetEntry> = chains
        .into_values()
        .filter_map(|chain| {
            let newest = chain.last()?.clone();
            match lake.record(&newest) {
                Some(Record::Dataset(d)) => Some(DatasetEntry {
                    node_id: newest,
                    dataset: d.clone(),
                    version_count: chain.len(),
                }),
                _ => None,
            }
        })
        .collect();
    dataset_section.sort_by(|a, b| a.dataset.dataset_id.cmp(&b.dataset.dataset_id));

    let mut model_section = Vec::new();
    let mut exports = Vec::new();
    let mut seen = BTreeSet::new();
    for (node, a) in &members {
        let focus = a
            .model_path
            .as_ref()
            .map(ToString::to_string)
            .filter(|m| graph.contains(m))
            .unwrap_or_else(|| node.clone());
        if seen.insert(focus.clone()) {
            exports.push(lake.lineage(&focus)?.export());
        }
        let record = lake.record(node).expect("member analyses are records");
        model_section.push(ModelEntry {
            analysis: node.clone(),
            analysis_id: a.analysis_id.clone(),
            description: a.description.clone(),
            algorithm: a.algorithm.clone(),
            parameters: a.parameters.clone(),
            performance: a.performance.clone(),
            model: a.model_path.clone(),
            completeness: completeness_5w1h(record, lake).map_or(0.0, |c| c.score),
        });
    }

    Ok(ProjectView {
        study: study.clone(),
        dataset_section,
        model_section,
        lineage_section: LineageExport::merge(study_node, exports),
    })
}
