#![allow(dead_code)]

use modellake::demo::{self, Fixture};
use modellake::model::RecordType;
use modellake::Lake;
use serde_json::Value;
use tempfile::TempDir;

pub struct FixtureLake {
    pub dir: TempDir,
    pub lake: Lake,
    pub fixture: Fixture,
}

pub fn empty_lake() -> (TempDir, Lake) {
    let dir = tempfile::tempdir().unwrap();
    let lake = Lake::init(dir.path().join("lake")).unwrap();
    (dir, lake)
}

pub fn diabetes_lake() -> FixtureLake {
    let (dir, mut lake) = empty_lake();
    let fixture = demo::diabetes();
    fixture.load(&mut lake).unwrap();
    FixtureLake { dir, lake, fixture }
}

pub fn node(lake: &Lake, t: RecordType, alias: &str) -> String {
    lake.node_for(t, alias)
        .unwrap_or_else(|| panic!("{t} {alias} not registered"))
        .to_string()
}

pub fn fixture_value(f: &Fixture, alias: &str) -> Value {
    f.records
        .iter()
        .find(|r| r.value[r.record_type.id_field()] == alias)
        .unwrap_or_else(|| panic!("no fixture record {alias}"))
        .value
        .clone()
}

/// Model blob id string of a registered analysis.
pub fn model_of(lake: &Lake, analysis: &str) -> String {
    match lake
        .record(&node(lake, RecordType::Analysis, analysis))
        .unwrap()
    {
        modellake::model::Record::Analysis(a) => a.model_path.clone().unwrap().to_string(),
        _ => unreachable!(),
    }
}
