//! The demo fixture as plain files: blobs, one JSON file per record, a
//! manifest, and a shell script that loads them with `mlk`.

use std::path::PathBuf;

use modellake::demo::{Fixture, STUDY_ID};
use modellake::model::RecordType;
use serde_json::json;

/// `mlk` arguments that register a record of this type from `file`.
pub fn register_args(record_type: RecordType, file: &str) -> Vec<String> {
    let mut args: Vec<String> = match record_type {
        RecordType::Ingest => vec!["ingest".into()],
        RecordType::Process => vec!["register-process".into()],
        RecordType::Analysis => vec!["register-analysis".into()],
        other => vec!["register".into(), other.as_str().into()],
    };
    args.extend(["-f".into(), file.into()]);
    args
}

/// Relative path and contents of every file.
pub fn render(
    fixture: &Fixture,
    approved_source: &str,
    audited_model: &str,
) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    for b in &fixture.blobs {
        files.push((PathBuf::from("blobs").join(&b.file), b.bytes.clone()));
    }
    for r in &fixture.records {
        let mut text = serde_json::to_string_pretty(&r.value).expect("fixture records serialize");
        text.push('\n');
        files.push((PathBuf::from("records").join(&r.file), text.into_bytes()));
    }

    let manifest = json!({
        "study": STUDY_ID,
        "approved_source": approved_source,
        "audited_model": audited_model,
        "blobs": fixture.blobs.iter().map(|b| json!({"file": format!("blobs/{}", b.file), "kind": b.kind})).collect::<Vec<_>>(),
        "records": fixture.records.iter().map(|r| json!({"file": format!("records/{}", r.file), "record_type": r.record_type})).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    files.push((PathBuf::from("manifest.json"), text.into_bytes()));

    let mut sh = String::from(
        "#!/bin/sh\n# Loads the Diabetes prediction fixture into a fresh lake.\n# Usage: ./load.sh [lake-dir]  (run from this directory, mlk on PATH)\nset -e\nLAKE=\"${1:-./diabetes-lake}\"\nmlk init \"$LAKE\"\n",
    );
    for b in &fixture.blobs {
        sh.push_str(&format!(
            "mlk -d \"$LAKE\" put blobs/{} --kind {}\n",
            b.file, b.kind
        ));
    }
    for r in &fixture.records {
        let args = register_args(r.record_type, &format!("records/{}", r.file));
        sh.push_str(&format!("mlk -d \"$LAKE\" {}\n", args.join(" ")));
    }
    sh.push_str(&format!("mlk -d \"$LAKE\" project {STUDY_ID}\n"));
    sh.push_str(&format!(
        "mlk -d \"$LAKE\" audit compliance {audited_model} --approved {approved_source}\n"
    ));
    files.push((PathBuf::from("load.sh"), sh.into_bytes()));
    files
}

/// The checked-in Diabetes fixture.
pub fn diabetes_files() -> Vec<(PathBuf, Vec<u8>)> {
    let fx = modellake::demo::diabetes();
    let model = fx.blob("rf_v2.model").id().to_string();
    render(&fx, "src-pima", &model)
}
