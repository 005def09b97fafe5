use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{AnalysisRecord, IngestRecord, ProcessRecord, Record, Resolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    What,
    Who,
    Where,
    When,
    Why,
    How,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Self::What,
        Self::Who,
        Self::Where,
        Self::When,
        Self::Why,
        Self::How,
    ];
}

/// 5W1H coverage of one record. `score` is always satisfied/6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessScore {
    pub per_dimension: BTreeMap<Dimension, bool>,
    pub score: f64,
}

impl CompletenessScore {
    fn from_flags(flags: [bool; 6]) -> Self {
        let per_dimension: BTreeMap<_, _> = Dimension::ALL.into_iter().zip(flags).collect();
        let satisfied = flags.iter().filter(|f| **f).count();
        Self {
            per_dimension,
            score: satisfied as f64 / 6.0,
        }
    }

    pub fn satisfied(&self) -> u32 {
        self.per_dimension.values().filter(|v| **v).count() as u32
    }

    /// Exact score as a fraction of six.
    pub fn ratio(&self) -> Ratio<u32> {
        Ratio::new(self.satisfied(), 6)
    }

    pub fn is_complete(&self) -> bool {
        self.satisfied() == 6
    }

    pub fn dimension(&self, d: Dimension) -> bool {
        self.per_dimension.get(&d).copied().unwrap_or(false)
    }
}

fn filled(s: &str) -> bool {
    !s.trim().is_empty()
}

fn filled_opt(s: &Option<String>) -> bool {
    s.as_deref().is_some_and(filled)
}

/// Scores ingest, process and analysis records; other families have no
/// 5W1H mapping and yield `None`.
pub fn completeness_5w1h<R: Resolver + ?Sized>(
    record: &Record,
    resolver: &R,
) -> Option<CompletenessScore> {
    match record {
        Record::Ingest(r) => Some(ingest(r, resolver)),
        Record::Process(r) => Some(process(r)),
        Record::Analysis(r) => Some(analysis(r)),
        _ => None,
    }
}

fn ingest<R: Resolver + ?Sized>(r: &IngestRecord, resolver: &R) -> CompletenessScore {
    let source = resolver.source(&r.from_source);
    let dataset = resolver.dataset(&r.to_dataset);
    CompletenessScore::from_flags([
        source.is_some_and(|s| filled(&s.description)) && dataset.is_some_and(|d| filled(&d.name)),
        filled(&r.ingested_by),
        filled(&r.access_url) && dataset.is_some_and(|d| d.location.is_some()),
        r.ingested_at.as_ref().is_some_and(|t| t.is_valid()),
        filled(&r.comments),
        r.mode.is_some() && filled_opt(&r.environment),
    ])
}

fn process(r: &ProcessRecord) -> CompletenessScore {
    CompletenessScore::from_flags([
        filled(&r.name) && !r.source_datasets.is_empty() && !r.target_datasets.is_empty(),
        filled(&r.executed_by),
        r.code.is_some(),
        r.created_at.as_ref().is_some_and(|t| t.is_valid()),
        filled(&r.description),
        !r.operations.is_empty() && filled(&r.language_program),
    ])
}

fn analysis(r: &AnalysisRecord) -> CompletenessScore {
    CompletenessScore::from_flags([
        filled(&r.description) && !r.used_datasets.is_empty(),
        filled(&r.performed_by),
        r.model_path.is_some(),
        r.performed_at.as_ref().is_some_and(|t| t.is_valid()),
        filled_opt(&r.study) || filled_opt(&r.task),
        r.algorithm.as_ref().is_some_and(|a| filled(&a.name))
            && !r.parameters.is_empty()
            && filled_opt(&r.environment),
    ])
}
