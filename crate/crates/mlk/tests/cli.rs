use std::path::{Path, PathBuf};

use modellake::demo;
use modellake::Lake;
use modellake_server::{serve, ServiceConfig};
use serde_json::{json, Value};
use tempfile::TempDir;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Out {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn mlk(args: &[&str]) -> Out {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = mlk::run(
        std::iter::once("mlk").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Out {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/diabetes")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A fresh lake loaded from the checked-in fixture files through the CLI.
fn diabetes_lake() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let lake = dir.path().join("lake");
    assert_eq!(mlk(&["init", s(&lake)]).code, 0);
    let fx = fixture_dir();
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(fx.join("manifest.json")).unwrap()).unwrap();
    for b in manifest["blobs"].as_array().unwrap() {
        let file = fx.join(b["file"].as_str().unwrap());
        let r = mlk(&[
            "-d",
            s(&lake),
            "put",
            s(&file),
            "--kind",
            b["kind"].as_str().unwrap(),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    for rec in manifest["records"].as_array().unwrap() {
        let file = fx.join(rec["file"].as_str().unwrap());
        let args = mlk::fixture_files::register_args(
            rec["record_type"].as_str().unwrap().parse().unwrap(),
            s(&file),
        );
        let mut full = vec!["-d", s(&lake)];
        full.extend(args.iter().map(String::as_str));
        let r = mlk(&full);
        assert_eq!(r.code, 0, "{}: {}", file.display(), r.stderr);
    }
    (dir, lake)
}

#[test]
fn checked_in_fixture_files_match_the_generator() {
    let root = fixture_dir();
    let expected = mlk::fixture_files::diabetes_files();
    for (rel, bytes) in &expected {
        let on_disk = std::fs::read(root.join(rel))
            .unwrap_or_else(|e| panic!("{}: {e}; rerun the write_fixture example", rel.display()));
        assert!(
            on_disk == *bytes,
            "{} drifted; rerun the write_fixture example",
            rel.display()
        );
    }
    let count = walk(&root);
    assert_eq!(
        count,
        expected.len(),
        "stray files under {}",
        root.display()
    );
}

fn walk(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p)
            } else {
                1
            }
        })
        .sum()
}

#[test]
fn fresh_lake_health_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let lake = dir.path().join("d");
    let r = mlk(&["init", s(&lake)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = mlk(&["-d", s(&lake), "-o", "json", "audit", "health"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["documentation_rate"], json!(0.0));
    assert_eq!(v["total_models"], 0);
    assert_eq!(v["swamp_flag"], false);
    // Re-init is harmless.
    let r = mlk(&["-o", "json", "init", s(&lake)]);
    assert_eq!((r.code, r.json()["created"].clone()), (0, json!(false)));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let lake = dir.path().join("lake");
    mlk(&["init", s(&lake)]);
    let d = s(&lake);

    let r = mlk(&["-d", d, "-o", "json", "lineage", "unknown-id"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json()["code"], "not_found");
    assert!(r.stderr.contains("not found"));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"ingest_id": "i", "mode": "batch", "from_source": "nope",
        "to_dataset": "nope", "ingested_by": "nobody", "access_url": "x",
        "ingested_at": "2024-01-01T00:00:00Z"}"#,
    )
    .unwrap();
    let r = mlk(&["-d", d, "-o", "json", "ingest", "-f", s(&bad)]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert_eq!(r.json()["code"], "validation_failed");

    let user = dir.path().join("u.json");
    std::fs::write(&user, r#"{"user_id": "u", "role": "other"}"#).unwrap();
    assert_eq!(mlk(&["-d", d, "register", "user", "-f", s(&user)]).code, 0);
    let again = mlk(&["-d", d, "register", "user", "-f", s(&user)]);
    assert_eq!(again.code, 0);
    assert!(again.stderr.contains("already present"));
    std::fs::write(&user, r#"{"user_id": "u", "role": "data_engineer"}"#).unwrap();
    assert_eq!(mlk(&["-d", d, "register", "user", "-f", s(&user)]).code, 1);

    std::fs::write(&bad, "{").unwrap();
    assert_eq!(mlk(&["-d", d, "register", "user", "-f", s(&bad)]).code, 1);
    assert_eq!(mlk(&["-d", d, "search"]).code, 1);
    assert_eq!(mlk(&["-d", d, "bogus-command"]).code, 1);

    // IO and configuration problems.
    assert_eq!(
        mlk(&["-d", d, "register", "user", "-f", "/no/such/file"]).code,
        3
    );
    assert_eq!(mlk(&["search", "--text", "x"]).code, 3);
    let plain = dir.path().join("plain");
    std::fs::create_dir(&plain).unwrap();
    assert_eq!(mlk(&["-d", s(&plain), "audit", "health"]).code, 3);
    assert_eq!(
        mlk(&[
            "-d",
            d,
            "--endpoint",
            "http://127.0.0.1:9",
            "audit",
            "health"
        ])
        .code,
        3
    );
    assert_eq!(
        mlk(&["--endpoint", "http://127.0.0.1:9", "audit", "health"]).code,
        3
    );
    let held = Lake::open(&lake).unwrap();
    let r = mlk(&["-d", d, "audit", "health"]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("locked"), "{}", r.stderr);
    drop(held);
    assert_eq!(mlk(&["-d", d, "audit", "health"]).code, 0);
}

#[test]
fn diabetes_scenario_through_the_cli() {
    let (_dir, lake) = diabetes_lake();
    let d = s(&lake);
    let r = mlk(&["-d", d, "-o", "json", "project", demo::STUDY_ID]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["dataset_section"].as_array().unwrap().len(), 1);
    assert_eq!(v["model_section"].as_array().unwrap().len(), 2);
    assert!(!v["lineage_section"]["nodes"].as_array().unwrap().is_empty());

    let model = demo::diabetes().blob("rf_v2.model").id().to_string();
    let r = mlk(&[
        "-d",
        d,
        "-o",
        "json",
        "audit",
        "compliance",
        &model,
        "--approved",
        "src-pima",
    ]);
    assert_eq!(r.json()["verdict"], "compliant");
    let r = mlk(&["-d", d, "-o", "json", "audit", "compliance", &model]);
    assert_eq!(r.json()["verdict"], "non_compliant");

    let r = mlk(&["-d", d, "-o", "json", "audit", "repro", "rf-v2"]);
    assert_eq!(r.json()["reproduced"], true);

    let r = mlk(&["-d", d, "-o", "json", "versions", "analysis:rf-v1"]);
    assert_eq!(r.json().as_array().unwrap().len(), 2);

    let r = mlk(&["-d", d, "-o", "json", "diff", "rf-v1", "rf-v2"]);
    let diff = r.json();
    let fields: Vec<&Value> = diff["changed_fields"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| &c["field"])
        .collect();
    assert!(fields.contains(&&json!("performance.accuracy")));

    // Table output is human text, not JSON.
    let r = mlk(&["-d", d, "project", demo::STUDY_ID]);
    assert_eq!(r.code, 0);
    assert!(
        r.stdout.contains("model_section:") && serde_json::from_str::<Value>(&r.stdout).is_err()
    );
    let r = mlk(&["-d", d, "lineage", "rf-v2", "--format", "json"]);
    assert!(r.json()["nodes"].is_array());
}

#[test]
fn mutations_are_visible_to_the_next_query() {
    let (dir, lake) = diabetes_lake();
    let d = s(&lake);
    let f = dir.path().join("carol.json");
    std::fs::write(
        &f,
        r#"{"user_id": "carol", "name": "Carol Diaz", "role": "other"}"#,
    )
    .unwrap();
    assert_eq!(mlk(&["-d", d, "register", "user", "-f", s(&f)]).code, 0);
    let r = mlk(&["-d", d, "-o", "json", "search", "--text", "carol"]);
    assert_eq!(r.json()[0]["name"], "Carol Diaz");

    let blob = dir.path().join("notes.txt");
    std::fs::write(&blob, "report body").unwrap();
    let r = mlk(&["-d", d, "-o", "json", "put", s(&blob), "--kind", "report"]);
    assert_eq!(
        r.json()["id"],
        modellake::BlobId::of(b"report body").to_string()
    );
    let r = mlk(&["-d", d, "-o", "json", "put", s(&blob), "--kind", "model"]);
    assert_eq!((r.code, r.json()["code"].clone()), (1, json!("conflict")));
}

#[test]
fn canonicalize_is_order_independent() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    std::fs::write(&a, concat!(
        r#"{"record_type": "user", "record": {"user_id": "u", "role": "other", "name": "Zoë"}}"#, "\n",
        r#"{"record_type": "task", "record": {"task_id": "t", "description": "x"}}"#, "\n",
    )).unwrap();
    std::fs::write(&b, concat!(
        r#"{"record": {"name": "Zoë", "role": "other", "user_id": "u"}, "record_type": "user"}"#, "\n",
        "\n",
        r#"{"record": {"description": "x", "task_id": "t"}, "record_type": "task"}"#, "\n",
    )).unwrap();
    let ra = mlk(&["canonicalize", "-f", s(&a)]);
    let rb = mlk(&["canonicalize", "-f", s(&b)]);
    assert_eq!(ra.code, 0, "{}", ra.stderr);
    assert_eq!(ra.stdout, rb.stdout);
    let first = ra.stdout.lines().next().unwrap();
    let (id, canonical) = first.split_once('\t').unwrap();
    assert_eq!(canonical, r#"{"name":"Zoë","role":"other","user_id":"u"}"#);
    assert!(id.starts_with("sha256:"));

    std::fs::write(&a, r#"{"record_type": "starship", "record": {}}"#).unwrap();
    assert_eq!(mlk(&["canonicalize", "-f", s(&a)]).code, 1);
}

/// Same lake state, queried first in-process and then through a service
/// over the same directory.
#[test]
fn embedded_and_remote_output_are_identical() {
    let (_dir, lake) = diabetes_lake();
    let d = s(&lake);
    let fx = demo::diabetes();
    let v1 = fx.blob("rf_v1.model").id().to_string();
    let v2 = fx.blob("rf_v2.model").id().to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["search", "--text", "diabetes"],
        vec![
            "search",
            "--kind",
            "dataset,analysis",
            "--tag",
            "medical",
            "--limit",
            "3",
        ],
        vec!["search", "--user", "bob", "--from", "2024-03-06T00:00:00Z"],
        vec!["search", "--text", "zebra"],
        vec!["lineage", &v2],
        vec!["lineage", "analysis:rf-v1"],
        vec!["lineage", "nope"],
        vec!["versions", "rf-v2"],
        vec!["diff", &v1, &v2],
        vec!["audit", "compliance", &v2, "--approved", "src-pima"],
        vec!["audit", "compliance", &v1],
        vec!["audit", "compliance", "rf-v1"],
        vec!["audit", "repro", "rf-v1"],
        vec!["audit", "bias", &v2],
        vec!["audit", "evolution", "rf-v2"],
        vec!["audit", "health"],
        vec!["audit", "health", "--threshold", "0.75"],
        vec!["project", demo::STUDY_ID],
        vec!["project", "missing"],
    ];
    let run_all = |prefix: &[&str]| -> Vec<(i32, String)> {
        commands
            .iter()
            .map(|c| {
                let mut args = prefix.to_vec();
                args.extend(["-o", "json"]);
                args.extend(c.iter().copied());
                let r = mlk(&args);
                (r.code, r.stdout)
            })
            .collect()
    };
    let embedded = run_all(&["-d", d]);

    let rt = tokio::runtime::Runtime::new().unwrap();
    let handle = rt
        .block_on(serve(ServiceConfig {
            bind: "127.0.0.1:0".into(),
            data_dir: lake.clone(),
            ..ServiceConfig::default()
        }))
        .unwrap();
    let url = handle.url();
    let remote = run_all(&["--endpoint", &url]);
    rt.block_on(handle.shutdown()).unwrap();

    for ((c, e), r) in commands.iter().zip(&embedded).zip(&remote) {
        assert_eq!(e, r, "mlk {}", c.join(" "));
    }
    assert!(embedded.iter().any(|(code, _)| *code == 2));
    assert!(embedded.iter().any(|(code, _)| *code == 1));
}
