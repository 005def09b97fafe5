//! Frozen canonical bytes produced by an independent serializer
//! (Python `json.dumps(sort_keys=True, separators=(",", ":"), ensure_ascii=False)`).

use modellake::model::{Record, RecordType};
use proptest::prelude::*;
use serde_json::{json, Value};

const INPUT: &str = include_str!("golden/ingest_record.json");
const CANONICAL: &[u8] = include_bytes!("golden/ingest_record.canonical");
const RECORD_ID: &str = include_str!("golden/ingest_record.record_id");

#[test]
fn golden_ingest_record_bytes() {
    let value: Value = serde_json::from_str(INPUT).unwrap();
    let record = Record::from_json(RecordType::Ingest, value).unwrap();
    assert_eq!(
        String::from_utf8(record.canonical_bytes().unwrap()).unwrap(),
        String::from_utf8(CANONICAL.to_vec()).unwrap()
    );
    assert_eq!(record.record_id().unwrap(), RECORD_ID.trim());
}

#[test]
fn record_id_member_is_ignored() {
    let mut value: Value = serde_json::from_str(INPUT).unwrap();
    value["record_id"] = json!("sha256:whatever");
    let record = Record::from_json(RecordType::Ingest, value).unwrap();
    assert_eq!(record.record_id().unwrap(), RECORD_ID.trim());
}

fn permute(value: &Value, seed: u64) -> Value {
    // Rebuild objects with keys inserted in a seed-dependent order.
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by_key(|k| {
                let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
                for b in k.bytes() {
                    h = h.rotate_left(5) ^ u64::from(b);
                    h = h.wrapping_mul(0x100_0000_01b3);
                }
                h
            });
            let mut out = serde_json::Map::new();
            for k in keys {
                out.insert(k.clone(), permute(&map[k], seed));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| permute(v, seed)).collect()),
        v => v.clone(),
    }
}

proptest! {
    #[test]
    fn key_order_never_matters(seed in any::<u64>(), comment in "\\PC{0,40}", acc in -1e6f64..1e6) {
        let base = json!({
            "analysis_id": "a1",
            "description": comment,
            "performed_by": "u",
            "performance": {"accuracy": acc, "f1": 0.5},
            "parameters": [{"name": "k", "value": "3", "value_type": "int"}],
        });
        let a = Record::from_json(RecordType::Analysis, base.clone()).unwrap();
        let b = Record::from_json(RecordType::Analysis, permute(&base, seed)).unwrap();
        prop_assert_eq!(a.canonical_bytes().unwrap(), b.canonical_bytes().unwrap());
        // Bytes parse back to an equal record.
        let back: Value = serde_json::from_slice(&a.canonical_bytes().unwrap()).unwrap();
        let c = Record::from_json(RecordType::Analysis, back).unwrap();
        prop_assert_eq!(c.record_id().unwrap(), a.record_id().unwrap());
    }
}
