mod common;

use common::{diabetes_lake, empty_lake, node};
use modellake::cas::{ArtifactKind, BlobStore};
use modellake::catalog::{get_project_view, search, SearchQuery};
use modellake::demo::STUDY_ID;
use modellake::lineage::NodeKind;
use modellake::model::{RecordType, Timestamp};
use modellake::Lake;
use proptest::prelude::*;
use serde_json::json;

#[test]
fn empty_lake_finds_nothing_and_empty_queries_fail() {
    let (_d, lake) = empty_lake();
    assert!(search(&lake, &SearchQuery::text("anything"))
        .unwrap()
        .is_empty());
    assert_eq!(
        search(&lake, &SearchQuery::default()).unwrap_err().code(),
        "invalid_query"
    );
    assert_eq!(
        search(&lake, &SearchQuery::text("   ")).unwrap_err().code(),
        "invalid_query"
    );
    let backwards = SearchQuery {
        from: Some(Timestamp::parse("2024-02-01T00:00:00Z").unwrap()),
        to: Some(Timestamp::parse("2024-01-01T00:00:00Z").unwrap()),
        ..SearchQuery::default()
    };
    assert_eq!(
        search(&lake, &backwards).unwrap_err().code(),
        "invalid_query"
    );
}

#[test]
fn diabetes_query_ranks_the_study_first() {
    let fx = diabetes_lake();
    let hits = search(&fx.lake, &SearchQuery::text("diabetes")).unwrap();
    assert_eq!(hits[0].node_id, node(&fx.lake, RecordType::Study, STUDY_ID));
    assert_eq!(hits[0].node_kind, NodeKind::Study);
    assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn filters_by_kind_tag_user_and_date() {
    let fx = diabetes_lake();
    let q = SearchQuery {
        kinds: vec![NodeKind::Dataset],
        tags: vec!["CLEANED".into()],
        ..SearchQuery::default()
    };
    let hits = search(&fx.lake, &q).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].name, "pima-clean");

    let by_bob = SearchQuery {
        user: Some("bob".into()),
        ..SearchQuery::default()
    };
    let names: Vec<String> = search(&fx.lake, &by_bob)
        .unwrap()
        .into_iter()
        .map(|h| h.name)
        .collect();
    // Bob's own user record matches too; undated, so it sorts last.
    assert_eq!(names, ["rf-v2", "rf-v1", "Bob Nguyen"]);

    let march_first_week = SearchQuery {
        from: Some(Timestamp::parse("2024-03-01T00:00:00Z").unwrap()),
        to: Some(Timestamp::parse("2024-03-07T23:59:59Z").unwrap()),
        limit: Some(2),
        ..SearchQuery::default()
    };
    let hits = search(&fx.lake, &march_first_week).unwrap();
    assert_eq!(hits.len(), 2);
    assert_eq!(hits[0].name, "rf-v1");
}

#[test]
fn equal_scores_and_times_fall_back_to_node_id() {
    let (_d, mut lake) = empty_lake();
    for i in 0..5 {
        let (b, _) = lake
            .put_artifact(format!("{i}").as_bytes(), ArtifactKind::Dataset)
            .unwrap();
        lake.register_json(
            RecordType::Dataset,
            json!({
                "dataset_id": format!("d{i}"), "name": "twin", "location": b.id.to_string(),
                "created_at": "2024-01-01T00:00:00Z"
            }),
        )
        .unwrap();
    }
    let hits = search(&lake, &SearchQuery::text("twin")).unwrap();
    assert_eq!(hits.len(), 5);
    assert!(hits.windows(2).all(|w| w[0].node_id < w[1].node_id));
}

const WORDS: &[&str] = &["alpha", "beta", "gamma", "Delta", "diabetes", "rf", "lake"];

fn random_lake(seed: u64, n: usize) -> (tempfile::TempDir, Lake) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (d, mut lake) = empty_lake();
    lake.register_json(RecordType::User, json!({"user_id": "u1", "role": "other"}))
        .unwrap();
    lake.register_json(RecordType::User, json!({"user_id": "u2", "role": "other"}))
        .unwrap();
    let pick = |rng: &mut rand_chacha::ChaCha8Rng| WORDS[rng.random_range(0..WORDS.len())];
    for i in 0..n {
        let (b, _) = lake
            .put_artifact(format!("blob {i}").as_bytes(), ArtifactKind::Dataset)
            .unwrap();
        let mut v = json!({
            "dataset_id": format!("ds{i}"),
            "name": format!("{} {}", pick(&mut rng), pick(&mut rng)),
            "description": pick(&mut rng),
            "tags": [pick(&mut rng)],
            "location": b.id.to_string(),
        });
        if rng.random_bool(0.7) {
            v["created_at"] = json!(format!("2024-0{}-01T00:00:00Z", rng.random_range(1..4)));
        }
        lake.register_json(RecordType::Dataset, v).unwrap();
        if rng.random_bool(0.3) {
            lake.register_json(RecordType::Source, json!({
                "source_id": format!("src{i}"), "name": pick(&mut rng),
                "description": pick(&mut rng), "owner": if rng.random_bool(0.5) { "u1" } else { "u2" },
            })).unwrap();
        }
    }
    (d, lake)
}

/// Filter-then-sort over every record, written without the catalog's code.
fn oracle(lake: &Lake, q: &SearchQuery) -> Vec<(String, u32)> {
    let terms: Vec<String> = q
        .text
        .as_deref()
        .unwrap_or("")
        .split_whitespace()
        .map(|t| t.to_lowercase())
        .collect();
    let mut rows = Vec::new();
    for (id, r) in lake.records() {
        let kind = r.record_type().node_kind();
        if !q.kinds.is_empty() && !q.kinds.contains(&kind) {
            continue;
        }
        let tags: Vec<String> = r.tags().iter().map(|t| t.label().to_lowercase()).collect();
        if !q.tags.iter().all(|t| tags.contains(&t.to_lowercase())) {
            continue;
        }
        if q.user.as_deref().is_some_and(|u| r.user() != Some(u)) {
            continue;
        }
        let mut score = 0;
        for t in &terms {
            score += u32::from(r.name().to_lowercase().contains(t));
            score += u32::from(r.description().to_lowercase().contains(t));
            score += u32::from(tags.iter().any(|g| g.contains(t)));
        }
        if !terms.is_empty() && score == 0 {
            continue;
        }
        let ts = r
            .timestamp()
            .map(|t| t.as_str().to_string())
            .unwrap_or_default();
        rows.push((score, ts, id.to_string()));
    }
    rows.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    rows.into_iter()
        .take(q.limit.unwrap_or(20))
        .map(|(s, _, id)| (id, s))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn search_equals_brute_force(seed in any::<u64>(), n in 0usize..40,
                                 text in proptest::option::of("(alpha|beta|diabetes|LAKE|zzz)( (gamma|rf))?"),
                                 tag in proptest::option::of("(alpha|delta)"),
                                 dataset_only in any::<bool>(),
                                 user in proptest::option::of("u[12]"),
                                 limit in proptest::option::of(1usize..15)) {
        let (_d, lake) = random_lake(seed, n);
        let q = SearchQuery {
            text,
            kinds: if dataset_only { vec![NodeKind::Dataset] } else { vec![] },
            tags: tag.into_iter().collect(),
            user,
            limit,
            ..SearchQuery::default()
        };
        match search(&lake, &q) {
            Ok(hits) => {
                let got: Vec<(String, u32)> = hits.iter().map(|h| (h.node_id.clone(), h.score)).collect();
                prop_assert_eq!(got, oracle(&lake, &q));
                // Determinism.
                prop_assert_eq!(search(&lake, &q).unwrap(), hits);
            }
            Err(e) => prop_assert!(q.validate().is_err(), "{}", e),
        }
    }
}

#[test]
fn diabetes_project_view_has_three_sections() {
    let fx = diabetes_lake();
    let view = get_project_view(&fx.lake, STUDY_ID).unwrap();
    assert_eq!(view.study.description, "Diabetes prediction");
    assert_eq!(view.dataset_section.len(), 1);
    assert_eq!(view.dataset_section[0].dataset.dataset_id, "pima-clean");
    assert_eq!(view.dataset_section[0].version_count, 1);
    let ids: Vec<&str> = view
        .model_section
        .iter()
        .map(|m| m.analysis_id.as_str())
        .collect();
    assert_eq!(ids, ["rf-v1", "rf-v2"]);
    assert!(view.model_section.iter().all(|m| m.completeness == 1.0));
    let lineage_ids: Vec<&str> = view
        .lineage_section
        .nodes
        .iter()
        .map(|n| n.node_id.as_str())
        .collect();
    for m in &view.model_section {
        assert!(lineage_ids.contains(&m.model.as_ref().unwrap().to_string().as_str()));
    }
    // Every blob the view mentions is present.
    let store = fx.lake.store();
    for m in &view.model_section {
        assert!(store.has_blob(m.model.as_ref().unwrap()));
    }
    for d in &view.dataset_section {
        assert!(store.has_blob(d.dataset.location.as_ref().unwrap()));
    }
    assert_eq!(
        get_project_view(&fx.lake, "nope").unwrap_err().code(),
        "not_found"
    );
}

#[test]
fn empty_study_has_empty_sections() {
    let (_d, mut lake) = empty_lake();
    lake.register_json(RecordType::Study, json!({"study_id": "quiet"}))
        .unwrap();
    let view = get_project_view(&lake, "quiet").unwrap();
    assert!(view.dataset_section.is_empty() && view.model_section.is_empty());
    assert!(view.lineage_section.nodes.is_empty() && view.lineage_section.edges.is_empty());
}
