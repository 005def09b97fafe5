//! Canonical JSON: the byte-exact wire and persistence form.
//!
//! UTF-8, object keys sorted by code point, no insignificant whitespace,
//! integers in shortest decimal form, floats in shortest round-trip form.
//! Callers are responsible for rejecting non-finite floats first, since
//! `serde_json` maps them to `null`.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CanonicalError {
    #[error("non-finite float in field '{0}'")]
    NonFinite(String),
    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    let value = serde_json::to_value(value)?;
    Ok(value_to_canonical_bytes(&value))
}

pub fn value_to_canonical_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(256);
    write_value(&mut out, value);
    out
}

/// `sha256:<hex>` of canonical bytes, with any top-level `record_id` removed.
pub fn content_id(value: &Value) -> String {
    let bytes = match value {
        Value::Object(map) if map.contains_key("record_id") => {
            let mut map = map.clone();
            map.remove("record_id");
            value_to_canonical_bytes(&Value::Object(map))
        }
        _ => value_to_canonical_bytes(value),
    };
    format!("sha256:{}", hex::encode(Sha256::digest(&bytes)))
}

fn write_value(out: &mut Vec<u8>, value: &Value) {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => out.extend_from_slice(n.to_string().as_bytes()),
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(out, item);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            // Byte order of UTF-8 equals code point order.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push(b'{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(out, key);
                out.push(b':');
                write_value(out, &map[key]);
            }
            out.push(b'}');
        }
    }
}

fn write_string(out: &mut Vec<u8>, s: &str) {
    serde_json::to_writer(&mut *out, s).expect("writing to a Vec cannot fail");
}
