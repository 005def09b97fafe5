//! A small, fully deterministic "Diabetes prediction" lake: two users, one
//! external source, a raw and a cleaned dataset, the ingest and cleaning
//! steps, a study, a task, and two versions of a random-forest analysis
//! whose models come from the stub trainer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cas::{ArtifactKind, BlobId};
use crate::error::Result;
use crate::lake::{Lake, Registration};
use crate::model::{Algorithm, Environment, Parameter, ParameterType, RecordType, Split};
use crate::stub_trainer::{self, TrainingInputs};

pub const STUDY_ID: &str = "diabetes-prediction";

#[derive(Debug, Clone)]
pub struct FixtureBlob {
    pub file: String,
    pub kind: ArtifactKind,
    pub bytes: Vec<u8>,
}

impl FixtureBlob {
    pub fn id(&self) -> BlobId {
        BlobId::of(&self.bytes)
    }
}

#[derive(Debug, Clone)]
pub struct FixtureRecord {
    pub file: String,
    pub record_type: RecordType,
    pub value: Value,
}

/// Blobs to store first, then records in registration order.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub blobs: Vec<FixtureBlob>,
    pub records: Vec<FixtureRecord>,
}

impl Fixture {
    pub fn blob(&self, file: &str) -> &FixtureBlob {
        self.blobs
            .iter()
            .find(|b| b.file == file)
            .unwrap_or_else(|| panic!("no fixture blob {file}"))
    }

    /// Stores every blob and registers every record, in order.
    pub fn load(&self, lake: &mut Lake) -> Result<Vec<Registration>> {
        for b in &self.blobs {
            lake.put_artifact(&b.bytes, b.kind)?;
        }
        self.records
            .iter()
            .map(|r| lake.register_json(r.record_type, r.value.clone()))
            .collect()
    }
}

fn raw_csv() -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1ab);
    let header = "pregnancies,glucose,blood_pressure,bmi,age,outcome\n";
    let (mut raw, mut clean) = (header.to_string(), header.to_string());
    for i in 0..40 {
        // Every seventh row has the classic missing-value zero for glucose.
        let glucose = if i % 7 == 3 {
            0
        } else {
            rng.random_range(70..200)
        };
        let row = format!(
            "{},{},{},{:.1},{},{}\n",
            rng.random_range(0..12),
            glucose,
            rng.random_range(50..100),
            rng.random_range(180..450) as f64 / 10.0,
            rng.random_range(21..70),
            u8::from(glucose > 140),
        );
        raw.push_str(&row);
        if glucose != 0 {
            clean.push_str(&row);
        }
    }
    (raw.into_bytes(), clean.into_bytes())
}

fn params(depth: &str) -> Vec<Parameter> {
    vec![
        Parameter {
            name: "n_estimators".into(),
            value: "100".into(),
            value_type: ParameterType::Int,
        },
        Parameter {
            name: "max_depth".into(),
            value: depth.into(),
            value_type: ParameterType::Int,
        },
    ]
}

pub fn diabetes() -> Fixture {
    let (raw, clean) = raw_csv();
    let clean_code = b"import pandas as pd\n\ndf = pd.read_csv('pima_raw.csv')\ndf = df[df.glucose != 0]\ndf.to_csv('pima_clean.csv', index=False)\n".to_vec();
    let train_code = b"from sklearn.ensemble import RandomForestClassifier\n\ndef fit(X, y, **params):\n    return RandomForestClassifier(**params).fit(X, y)\n".to_vec();

    let environment = Environment {
        env_id: "py311".into(),
        name: "python 3.11 / scikit-learn".into(),
        runtime_descriptors: [("python", "3.11.9"), ("scikit-learn", "1.4.2")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        hardware: "x86_64, 8 cores".into(),
    };
    let algorithm = Algorithm {
        name: "random_forest".into(),
        family: "ensemble".into(),
    };
    let data = vec![(clean.clone(), Split::Train), (clean.clone(), Split::Test)];
    let model = |depth: &str| {
        stub_trainer::train(&TrainingInputs {
            datasets: &data,
            code: &train_code,
            environment: &environment,
            algorithm: &algorithm,
            parameters: &params(depth),
        })
    };

    let blobs = vec![
        FixtureBlob {
            file: "pima_raw.csv".into(),
            kind: ArtifactKind::Dataset,
            bytes: raw,
        },
        FixtureBlob {
            file: "pima_clean.csv".into(),
            kind: ArtifactKind::Dataset,
            bytes: clean,
        },
        FixtureBlob {
            file: "clean.py".into(),
            kind: ArtifactKind::Code,
            bytes: clean_code,
        },
        FixtureBlob {
            file: "train_rf.py".into(),
            kind: ArtifactKind::Code,
            bytes: train_code.clone(),
        },
        FixtureBlob {
            file: "rf_v1.model".into(),
            kind: ArtifactKind::Model,
            bytes: model("4"),
        },
        FixtureBlob {
            file: "rf_v2.model".into(),
            kind: ArtifactKind::Model,
            bytes: model("6"),
        },
    ];
    let id = |f: &str| {
        blobs
            .iter()
            .find(|b| b.file == f)
            .expect("fixture blob")
            .id()
            .to_string()
    };

    let analysis = |aid: &str, depth: &str, acc: f64, at: &str, model_file: &str| {
        let mut v = json!({
            "analysis_id": aid,
            "description": "Random forest classifier predicting diabetes onset",
            "analysis_type": "classification",
            "performed_by": "bob",
            "study": STUDY_ID,
            "task": "predict-onset",
            "model_path": id(model_file),
            "code": id("train_rf.py"),
            "language_program": "python",
            "environment": "py311",
            "algorithm": algorithm,
            "parameters": params(depth),
            "used_datasets": [
                {"dataset": "pima-clean", "split": "train"},
                {"dataset": "pima-clean", "split": "test"}
            ],
            "target_feature": "outcome",
            "performance": {"accuracy": acc},
            "performed_at": at,
        });
        if aid == "rf-v2" {
            v["previous_version"] = json!("rf-v1");
        }
        v
    };

    let records = vec![
        (
            RecordType::User,
            "user-alice",
            json!({"user_id": "alice", "name": "Alice Martin", "role": "data_engineer"}),
        ),
        (
            RecordType::User,
            "user-bob",
            json!({"user_id": "bob", "name": "Bob Nguyen", "role": "data_scientist"}),
        ),
        (
            RecordType::Environment,
            "env-py311",
            serde_json::to_value(&environment).expect("serializable"),
        ),
        (
            RecordType::Source,
            "source-pima",
            json!({
                "source_id": "src-pima",
                "name": "Pima clinical survey export",
                "source_type": "file",
                "description": "Clinical measurements exported from a regional health survey",
                "owner": "alice",
                "location": "https://data.example.org/pima.csv",
                "created_at": "2024-02-20T08:00:00Z"
            }),
        ),
        (
            RecordType::Dataset,
            "dataset-pima-raw",
            json!({
                "dataset_id": "pima-raw",
                "name": "pima-raw",
                "format": "csv",
                "description": "Raw survey rows as delivered",
                "tags": ["medical", "tabular"],
                "attributes": [
                    {"name": "pregnancies", "declared_type": "int"},
                    {"name": "glucose", "declared_type": "int"},
                    {"name": "blood_pressure", "declared_type": "int"},
                    {"name": "bmi", "declared_type": "float"},
                    {"name": "age", "declared_type": "int"},
                    {"name": "outcome", "declared_type": "int"}
                ],
                "location": id("pima_raw.csv"),
                "created_at": "2024-03-01T09:00:00Z",
                "source": "src-pima"
            }),
        ),
        (
            RecordType::Ingest,
            "ingest-pima",
            json!({
                "ingest_id": "ing-pima",
                "mode": "batch",
                "comments": "Initial load of the survey export",
                "from_source": "src-pima",
                "to_dataset": "pima-raw",
                "ingested_by": "alice",
                "access_url": "https://data.example.org/pima.csv",
                "ingested_at": "2024-03-01T09:00:00Z",
                "environment": "py311"
            }),
        ),
        (
            RecordType::Dataset,
            "dataset-pima-clean",
            json!({
                "dataset_id": "pima-clean",
                "name": "pima-clean",
                "format": "csv",
                "description": "Survey rows with zero glucose readings removed",
                "tags": ["medical", "tabular", "cleaned"],
                "location": id("pima_clean.csv"),
                "created_at": "2024-03-02T10:00:00Z",
                "metafeatures": {
                    "n_rows": 34,
                    "n_attributes": 6,
                    "attributes": [{"attribute_name": "glucose", "declared_type": "int", "missing_fraction": 0.0}]
                }
            }),
        ),
        (
            RecordType::Process,
            "process-clean",
            json!({
                "process_id": "proc-clean",
                "name": "drop-missing-glucose",
                "description": "Remove rows whose glucose reading is a missing-value zero",
                "language_program": "python",
                "code": id("clean.py"),
                "created_at": "2024-03-02T09:30:00Z",
                "last_modified_at": "2024-03-02T10:00:00Z",
                "source_datasets": ["pima-raw"],
                "target_datasets": ["pima-clean"],
                "operations": [{"op_kind": "cleaning", "parameters": {"column": "glucose", "drop_value": "0"}, "order_index": 0}],
                "executed_by": "alice"
            }),
        ),
        (
            RecordType::Study,
            "study",
            json!({
                "study_id": STUDY_ID,
                "description": "Diabetes prediction",
                "study_type": "predictive modelling"
            }),
        ),
        (
            RecordType::Task,
            "task",
            json!({
                "task_id": "predict-onset",
                "description": "Binary classification of onset within five years",
                "task_type": "classification"
            }),
        ),
        (
            RecordType::Analysis,
            "analysis-rf-v1",
            analysis("rf-v1", "4", 0.80, "2024-03-05T14:00:00Z", "rf_v1.model"),
        ),
        (
            RecordType::Analysis,
            "analysis-rf-v2",
            analysis("rf-v2", "6", 0.85, "2024-03-12T14:00:00Z", "rf_v2.model"),
        ),
    ];
    let records = records
        .into_iter()
        .enumerate()
        .map(|(i, (record_type, name, value))| FixtureRecord {
            file: format!("{:02}-{name}.json", i + 1),
            record_type,
            value,
        })
        .collect();
    Fixture { blobs, records }
}
