//! Read-only audits over a lake: source compliance, reproducibility
//! manifests, bias surfacing, version evolution and lake health.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cas::{BlobId, BlobStore};
use crate::error::{LakeError, Result};
use crate::lake::Lake;
use crate::lineage::{EdgeKind, NodeKind, VersionDiff};
use crate::model::{
    completeness_5w1h, Algorithm, AnalysisRecord, Environment, Parameter, Record, RecordType,
    Resolver, Split,
};
use crate::stub_trainer::{self, TrainingInputs};

pub const DEFAULT_SWAMP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Compliant,
    NonCompliant,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub model: String,
    pub approved_sources: Vec<String>,
    pub verdict: Verdict,
    /// `source_id`s of unapproved sources in the model's lineage.
    pub offending_sources: Vec<String>,
    /// Dataset node ids with no source anywhere upstream.
    pub undocumented_paths: Vec<String>,
}

fn require_kind(lake: &Lake, reference: &str, kind: NodeKind) -> Result<String> {
    let node = lake.resolve_node(reference)?;
    if node.node_kind != kind {
        return Err(LakeError::KindMismatch {
            id: node.node_id.clone(),
            expected: kind.to_string(),
            actual: node.node_kind,
        });
    }
    Ok(node.node_id.clone())
}

fn nodes_of_kind(lake: &Lake, ids: &[String], kind: NodeKind) -> Vec<String> {
    ids.iter()
        .filter(|id| lake.graph().node(id).is_some_and(|n| n.node_kind == kind))
        .cloned()
        .collect()
}

fn alias_of(lake: &Lake, node_id: &str) -> String {
    lake.record(node_id)
        .map(|r| r.alias().to_string())
        .unwrap_or_else(|| node_id.to_string())
}

pub fn audit_compliance(
    lake: &Lake,
    model: &str,
    approved_sources: &BTreeSet<String>,
) -> Result<ComplianceReport> {
    let model = require_kind(lake, model, NodeKind::Model)?;
    let upstream = lake.upstream(&model)?;
    let offending_sources: BTreeSet<String> = nodes_of_kind(lake, &upstream, NodeKind::Source)
        .iter()
        .map(|s| alias_of(lake, s))
        .filter(|s| !approved_sources.contains(s))
        .collect();
    let mut undocumented_paths = Vec::new();
    for d in nodes_of_kind(lake, &upstream, NodeKind::Dataset) {
        let ancestors = lake.upstream(&d)?;
        if nodes_of_kind(lake, &ancestors, NodeKind::Source).is_empty() {
            undocumented_paths.push(d);
        }
    }
    let verdict = if !offending_sources.is_empty() {
        Verdict::NonCompliant
    } else if !undocumented_paths.is_empty() {
        Verdict::Undetermined
    } else {
        Verdict::Compliant
    };
    Ok(ComplianceReport {
        model,
        approved_sources: approved_sources.iter().cloned().collect(),
        verdict,
        offending_sources: offending_sources.into_iter().collect(),
        undocumented_paths,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestDataset {
    pub dataset_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob: Option<BlobId>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproManifest {
    pub analysis: String,
    pub datasets: Vec<ManifestDataset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<BlobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    pub parameters: Vec<Parameter>,
    /// `code`, `environment`, `algorithm`, `datasets` (none listed) or
    /// `dataset:<id>` for each dataset whose blob is absent.
    pub missing: Vec<String>,
    pub complete: bool,
}

fn analysis_record<'a>(lake: &'a Lake, node_id: &str) -> &'a AnalysisRecord {
    match lake.record(node_id) {
        Some(Record::Analysis(a)) => a,
        _ => unreachable!("analysis nodes carry analysis records"),
    }
}

pub fn reproducibility_closure(lake: &Lake, analysis: &str) -> Result<ReproManifest> {
    let id = require_kind(lake, analysis, NodeKind::Analysis)?;
    let a = analysis_record(lake, &id);
    let store = lake.store();
    let mut missing = Vec::new();

    let mut datasets = Vec::new();
    for u in &a.used_datasets {
        let blob = lake.dataset(&u.dataset).and_then(|d| d.location.clone());
        if !blob.as_ref().is_some_and(|b| store.has_blob(b)) {
            missing.push(format!("dataset:{}", u.dataset));
        }
        datasets.push(ManifestDataset {
            dataset_id: u.dataset.clone(),
            blob,
            split: u.split,
        });
    }
    if datasets.is_empty() {
        missing.insert(0, "datasets".to_string());
    }
    if !a.code.as_ref().is_some_and(|c| store.has_blob(c)) {
        missing.push("code".into());
    }
    let environment =
        a.environment
            .as_deref()
            .and_then(|e| match lake.resolve(RecordType::Environment, e) {
                Some(Record::Environment(env)) => Some(env.clone()),
                _ => None,
            });
    if environment.is_none() {
        missing.push("environment".into());
    }
    if a.algorithm.is_none() {
        missing.push("algorithm".into());
    }
    missing.sort();
    Ok(ReproManifest {
        analysis: id,
        datasets,
        code: a.code.clone(),
        environment,
        algorithm: a.algorithm.clone(),
        parameters: a.parameters.clone(),
        complete: missing.is_empty(),
        missing,
    })
}

/// Runs the stub trainer on a complete manifest's inputs.
pub fn retrain_stub(lake: &Lake, manifest: &ReproManifest) -> Result<Option<Vec<u8>>> {
    if !manifest.complete {
        return Ok(None);
    }
    let store = lake.store();
    let mut data = Vec::with_capacity(manifest.datasets.len());
    for d in &manifest.datasets {
        let blob = d
            .blob
            .as_ref()
            .expect("complete manifests have dataset blobs");
        data.push((store.get_blob(blob)?, d.split));
    }
    let code = store.get_blob(manifest.code.as_ref().expect("complete"))?;
    Ok(Some(stub_trainer::train(&TrainingInputs {
        datasets: &data,
        code: &code,
        environment: manifest.environment.as_ref().expect("complete"),
        algorithm: manifest.algorithm.as_ref().expect("complete"),
        parameters: &manifest.parameters,
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproCheck {
    pub manifest: ReproManifest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registered_model: Option<BlobId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerun_model: Option<BlobId>,
    pub reproduced: bool,
}

/// Re-runs the stub trainer and compares against the registered model.
pub fn check_reproduction(lake: &Lake, analysis: &str) -> Result<ReproCheck> {
    let manifest = reproducibility_closure(lake, analysis)?;
    let registered_model = analysis_record(lake, &manifest.analysis).model_path.clone();
    let rerun_model = retrain_stub(lake, &manifest)?.map(|bytes| BlobId::of(&bytes));
    let reproduced = rerun_model.is_some() && rerun_model == registered_model;
    Ok(ReproCheck {
        manifest,
        registered_model,
        rerun_model,
        reproduced,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasEntry {
    pub source: String,
    pub owner: String,
    pub description: String,
    /// Training datasets (node ids) of the model that descend from the source.
    pub datasets_affected: Vec<String>,
}

pub fn bias_surface(lake: &Lake, model: &str) -> Result<Vec<BiasEntry>> {
    let model = require_kind(lake, model, NodeKind::Model)?;
    let upstream = lake.upstream(&model)?;
    let mut training = BTreeSet::new();
    for act in nodes_of_kind(lake, &upstream, NodeKind::Analysis) {
        for e in lake.graph().outgoing(&act, Some(EdgeKind::UsedData)) {
            if matches!(e.split, Some(Split::Train | Split::Full)) {
                training.insert(e.to.clone());
            }
        }
    }
    let mut out = Vec::new();
    for s in nodes_of_kind(lake, &upstream, NodeKind::Source) {
        let Some(Record::Source(src)) = lake.record(&s) else {
            continue;
        };
        let mut affected = Vec::new();
        for d in &training {
            if lake.upstream(d)?.contains(&s) {
                affected.push(d.clone());
            }
        }
        out.push(BiasEntry {
            source: src.source_id.clone(),
            owner: src.owner.clone(),
            description: src.description.clone(),
            datasets_affected: affected,
        });
    }
    out.sort_by(|a, b| a.source.cmp(&b.source));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionEntry {
    pub version: String,
    pub analysis_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performed_at: Option<crate::model::Timestamp>,
    pub performance: BTreeMap<String, f64>,
    /// Difference from the previous entry; absent for the first version.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<VersionDiff>,
}

pub fn evolution_report(lake: &Lake, head: &str) -> Result<Vec<EvolutionEntry>> {
    let head = require_kind(lake, head, NodeKind::Analysis)?;
    let chain = lake.version_chain(&head)?;
    let mut out = Vec::with_capacity(chain.len());
    for (i, v) in chain.iter().enumerate() {
        let a = analysis_record(lake, v);
        let diff = match i {
            0 => None,
            _ => Some(lake.diff_versions(&chain[i - 1], v)?),
        };
        out.push(EvolutionEntry {
            version: v.clone(),
            analysis_id: a.analysis_id.clone(),
            performed_at: a.performed_at.clone(),
            performance: a.performance.clone(),
            diff,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LakeHealth {
    pub total_models: u64,
    pub documented_models: u64,
    pub documentation_rate: f64,
    pub mean_completeness: f64,
    pub threshold: f64,
    pub swamp_flag: bool,
}

impl LakeHealth {
    /// `documented_models / total_models`, 0 for an empty lake.
    pub fn exact_rate(&self) -> Ratio<u64> {
        match self.total_models {
            0 => Ratio::zero(),
            t => Ratio::new(self.documented_models, t),
        }
    }
}

/// Counts model nodes whose producing analysis is fully documented
/// (5W1H score 1). Rates are computed exactly; the threshold is read as the
/// decimal it prints as, so `0.44` means 44/100 rather than the nearest
/// binary double (which is slightly larger).
pub fn lake_health(lake: &Lake, threshold: f64) -> Result<LakeHealth> {
    if !threshold.is_finite() {
        return Err(LakeError::InvalidQuery(format!(
            "swamp threshold must be finite, got {threshold}"
        )));
    }
    let mut total = 0u64;
    let mut documented = 0u64;
    let mut completeness_sum = Ratio::<u64>::zero();
    for node in lake.graph().nodes() {
        if node.node_kind != NodeKind::Model {
            continue;
        }
        total += 1;
        let score = lake
            .graph()
            .producer(&node.node_id)
            .and_then(|p| lake.record(p))
            .and_then(|r| completeness_5w1h(r, lake));
        if let Some(s) = score {
            let r = s.ratio();
            completeness_sum += Ratio::new(u64::from(*r.numer()), u64::from(*r.denom()));
            if s.is_complete() {
                documented += 1;
            }
        }
    }
    let rate = match total {
        0 => Ratio::zero(),
        t => Ratio::new(documented, t),
    };
    let mean = match total {
        0 => Ratio::zero(),
        t => completeness_sum / t,
    };
    let exact =
        |r: Ratio<u64>| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
    let bound = decimal_ratio(threshold);
    // An empty lake shows no evidence of decay.
    let swamp_flag = total > 0 && exact(rate) < bound;
    Ok(LakeHealth {
        total_models: total,
        documented_models: documented,
        documentation_rate: ratio_to_f64(rate),
        mean_completeness: ratio_to_f64(mean),
        threshold,
        swamp_flag,
    })
}

/// Exact value of the shortest decimal that round-trips to `x`.
fn decimal_ratio(x: f64) -> BigRational {
    // Display never uses exponent notation and is shortest round-trip.
    let text = x.to_string();
    let (negative, text) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, scale);
    if negative {
        -r
    } else {
        r
    }
}

/// Correctly rounded for the small ratios seen here: both parts convert to
/// f64 exactly, and IEEE division rounds once.
fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    r.numer().to_f64().expect("u64 to f64") / r.denom().to_f64().expect("u64 to f64")
}
