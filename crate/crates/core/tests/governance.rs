mod common;

use std::collections::BTreeSet;

use common::{diabetes_lake, empty_lake, fixture_value, model_of, node};
use modellake::cas::{ArtifactKind, BlobStore};
use modellake::governance::{
    audit_compliance, bias_surface, check_reproduction, evolution_report, lake_health,
    reproducibility_closure, Verdict, DEFAULT_SWAMP_THRESHOLD,
};
use modellake::model::{Record, RecordType};
use modellake::testkit::{scaffold, swamp_lake, synthetic_analysis};
use modellake::Lake;
use num_rational::Ratio;
use proptest::prelude::*;
use serde_json::json;

fn approved(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn counts(lake: &Lake) -> (usize, usize, u64) {
    (
        lake.graph().node_count(),
        lake.graph().edge_count(),
        lake.log_len(),
    )
}

#[test]
fn fixture_model_is_compliant_only_with_its_source_approved() {
    let fx = diabetes_lake();
    let model = model_of(&fx.lake, "rf-v1");
    let ok = audit_compliance(&fx.lake, &model, &approved(&["src-pima"])).unwrap();
    assert_eq!(ok.verdict, Verdict::Compliant);
    assert!(ok.offending_sources.is_empty() && ok.undocumented_paths.is_empty());

    let bad = audit_compliance(&fx.lake, &model, &approved(&["other"])).unwrap();
    assert_eq!(bad.verdict, Verdict::NonCompliant);
    assert_eq!(bad.offending_sources, ["src-pima"]);

    assert_eq!(
        audit_compliance(&fx.lake, "rf-v1", &approved(&[]))
            .unwrap_err()
            .code(),
        "kind_mismatch"
    );
    assert_eq!(
        audit_compliance(&fx.lake, "missing", &approved(&[]))
            .unwrap_err()
            .code(),
        "not_found"
    );
}

#[test]
fn dataset_without_ingest_lineage_is_undetermined() {
    let (_d, mut lake) = empty_lake();
    scaffold(&mut lake).unwrap();
    synthetic_analysis(&mut lake, 0, true).unwrap();
    let model = lake
        .graph()
        .nodes()
        .iter()
        .find(|n| n.node_kind.as_str() == "model")
        .unwrap()
        .node_id
        .clone();
    let r = audit_compliance(&lake, &model, &approved(&["src"])).unwrap();
    assert_eq!(r.verdict, Verdict::Undetermined);
    assert_eq!(
        r.undocumented_paths,
        [node(&lake, RecordType::Dataset, "d")]
    );
    assert!(bias_surface(&lake, &model).unwrap().is_empty());
}

/// Two sources feeding two datasets, both used to train one model.
fn two_source_lake() -> (tempfile::TempDir, Lake, String) {
    let (d, mut lake) = empty_lake();
    scaffold(&mut lake).unwrap();
    for s in ["s1", "s2"] {
        lake.register_json(
            RecordType::Source,
            json!({"source_id": s, "owner": "u", "description": format!("{s} survey")}),
        )
        .unwrap();
        let (b, _) = lake
            .put_artifact(s.as_bytes(), ArtifactKind::Dataset)
            .unwrap();
        lake.register_json(
            RecordType::Dataset,
            json!({"dataset_id": format!("d-{s}"), "location": b.id.to_string()}),
        )
        .unwrap();
        lake.register_json(RecordType::Ingest, json!({"ingest_id": format!("i-{s}"), "from_source": s,
            "to_dataset": format!("d-{s}"), "ingested_by": "u", "ingested_at": "2024-01-01T00:00:00Z"})).unwrap();
    }
    let (m, _) = lake.put_artifact(b"m", ArtifactKind::Model).unwrap();
    let (c, _) = lake.put_artifact(b"c", ArtifactKind::Code).unwrap();
    lake.register_json(RecordType::Analysis, json!({
        "analysis_id": "a", "performed_by": "u", "model_path": m.id.to_string(),
        "code": c.id.to_string(), "environment": "env",
        "used_datasets": [{"dataset": "d-s1", "split": "train"}, {"dataset": "d-s2", "split": "test"}]
    })).unwrap();
    (d, lake, m.id.to_string())
}

#[test]
fn bias_surface_lists_each_source() {
    let (_d, lake, model) = two_source_lake();
    let entries = bias_surface(&lake, &model).unwrap();
    let sources: Vec<&str> = entries.iter().map(|e| e.source.as_str()).collect();
    assert_eq!(sources, ["s1", "s2"]);
    assert_eq!(entries[0].owner, "u");
    assert_eq!(
        entries[0].datasets_affected,
        [node(&lake, RecordType::Dataset, "d-s1")]
    );
    // d-s2 only feeds the test split.
    assert!(entries[1].datasets_affected.is_empty());
    let up = lake.upstream(&model).unwrap();
    for e in &entries {
        assert!(e.datasets_affected.iter().all(|d| up.contains(d)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn compliance_is_monotone_in_the_approved_set(small in proptest::collection::btree_set("s[0-3]", 0..4),
                                                   extra in proptest::collection::btree_set("s[0-3]", 0..4)) {
        let (_d, lake, model) = two_source_lake();
        let large: BTreeSet<String> = small.union(&extra).cloned().collect();
        let a = audit_compliance(&lake, &model, &small).unwrap();
        let b = audit_compliance(&lake, &model, &large).unwrap();
        prop_assert!(b.offending_sources.iter().all(|s| a.offending_sources.contains(s)));
        prop_assert!(!(a.verdict == Verdict::Compliant && b.verdict == Verdict::NonCompliant));
    }
}

#[test]
fn fixture_analyses_reproduce_with_the_stub_trainer() {
    let fx = diabetes_lake();
    for a in ["rf-v1", "rf-v2"] {
        let check = check_reproduction(&fx.lake, a).unwrap();
        assert!(check.manifest.complete, "{:?}", check.manifest.missing);
        assert!(check.reproduced, "{a}");
        assert_eq!(
            check.rerun_model.unwrap().to_string(),
            model_of(&fx.lake, a)
        );
    }
}

#[test]
fn missing_code_blob_is_reported() {
    let fx = diabetes_lake();
    let code = fx.fixture.blob("train_rf.py").id();
    std::fs::remove_file(fx.lake.store().object_path(&code)).unwrap();
    assert!(!fx.lake.store().has_blob(&code));
    let m = reproducibility_closure(&fx.lake, "rf-v1").unwrap();
    assert_eq!(m.missing, ["code"]);
    assert!(!m.complete);
    assert!(!check_reproduction(&fx.lake, "rf-v1").unwrap().reproduced);
}

#[test]
fn evolution_echoes_performance_in_chain_order() {
    let mut fx = diabetes_lake();
    let (m, _) = fx.lake.put_artifact(b"rf v3", ArtifactKind::Model).unwrap();
    let mut v = fixture_value(&fx.fixture, "rf-v2");
    v["analysis_id"] = json!("rf-v3");
    v["previous_version"] = json!("rf-v2");
    v["model_path"] = json!(m.id.to_string());
    v["performance"] = json!({"accuracy": 0.87});
    fx.lake.register_json(RecordType::Analysis, v).unwrap();
    for head in ["rf-v1", "rf-v2", "rf-v3"] {
        let report = evolution_report(&fx.lake, head).unwrap();
        let acc: Vec<f64> = report.iter().map(|e| e.performance["accuracy"]).collect();
        assert_eq!(acc, [0.80, 0.85, 0.87]);
        assert!(report[0].diff.is_none() && report[1].diff.is_some());
        assert_eq!(report.len(), fx.lake.version_chain(head).unwrap().len());
    }
    assert_eq!(
        evolution_report(&fx.lake, "pima-clean").unwrap_err().code(),
        "kind_mismatch"
    );
}

#[test]
fn single_version_family_has_one_entry() {
    let (_d, mut lake) = empty_lake();
    scaffold(&mut lake).unwrap();
    synthetic_analysis(&mut lake, 0, true).unwrap();
    let r = evolution_report(&lake, "a00000").unwrap();
    assert_eq!(r.len(), 1);
    assert!(r[0].diff.is_none());
}

#[test]
fn health_of_empty_and_fixture_lakes() {
    let (_d, lake) = empty_lake();
    let h = lake_health(&lake, DEFAULT_SWAMP_THRESHOLD).unwrap();
    assert_eq!(
        (h.total_models, h.documentation_rate, h.swamp_flag),
        (0, 0.0, false)
    );

    let fx = diabetes_lake();
    let h = lake_health(&fx.lake, DEFAULT_SWAMP_THRESHOLD).unwrap();
    assert_eq!((h.total_models, h.documented_models), (2, 2));
    assert_eq!(h.documentation_rate, 1.0);
    assert!(!h.swamp_flag);
}

/// Independent recount straight from the analysis records.
fn recount(lake: &Lake) -> (u64, u64) {
    let mut total = 0;
    let mut documented = 0;
    for (_, r) in lake.records() {
        let Record::Analysis(a) = r else { continue };
        if a.model_path.is_none() {
            continue;
        }
        total += 1;
        let full = !a.description.is_empty()
            && !a.used_datasets.is_empty()
            && !a.performed_by.is_empty()
            && a.performed_at.is_some()
            && (a.study.is_some() || a.task.is_some())
            && a.algorithm.is_some()
            && !a.parameters.is_empty()
            && a.environment.is_some();
        documented += u64::from(full);
    }
    (total, documented)
}

#[test]
fn health_rate_is_exact_and_matches_a_recount() {
    let (_d, mut lake) = empty_lake();
    swamp_lake(&mut lake, 50, 22).unwrap();
    let before = counts(&lake);
    let h = lake_health(&lake, DEFAULT_SWAMP_THRESHOLD).unwrap();
    assert_eq!(counts(&lake), before);
    assert_eq!(recount(&lake), (h.total_models, h.documented_models));
    assert_eq!(h.exact_rate(), Ratio::new(22, 50));
    assert_eq!(h.documentation_rate, 0.44);
    assert!(h.swamp_flag);
    // 28 of the models miss one dimension: mean = (22 + 28 * 5/6) / 50.
    assert_eq!(h.mean_completeness, (22.0 * 6.0 + 28.0 * 5.0) / 300.0);
    assert!(!lake_health(&lake, 0.44).unwrap().swamp_flag);
    assert!(
        lake_health(&lake, 0.440_000_000_000_001)
            .unwrap()
            .swamp_flag
    );
}

#[test]
fn governance_is_read_only() {
    let fx = diabetes_lake();
    let before = counts(&fx.lake);
    let model = model_of(&fx.lake, "rf-v2");
    audit_compliance(&fx.lake, &model, &approved(&["src-pima"])).unwrap();
    check_reproduction(&fx.lake, "rf-v2").unwrap();
    bias_surface(&fx.lake, &model).unwrap();
    evolution_report(&fx.lake, "rf-v2").unwrap();
    lake_health(&fx.lake, 0.5).unwrap();
    assert_eq!(counts(&fx.lake), before);
}
