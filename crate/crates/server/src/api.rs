//! Transport-independent request handling.
//!
//! The HTTP service and the CLI's embedded mode both go through [`query`]
//! and [`write`], and both serialize with [`to_body`], so the two produce
//! byte-identical payloads for the same lake state.

use std::collections::BTreeSet;

use modellake::catalog::{self, SearchQuery};
use modellake::governance;
use modellake::model::canonical::to_canonical_bytes;
use modellake::model::{RecordType, Timestamp, ValidationReport};
use modellake::{ArtifactKind, Lake, LakeError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violations: Option<ValidationReport>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
            violations: None,
        }
    }

    pub fn invalid_query(message: impl Into<String>) -> Self {
        Self::new("invalid_query", message)
    }

    pub fn status(&self) -> u16 {
        status_for(&self.code)
    }
}

/// HTTP status for an error code; the code alone decides it.
pub fn status_for(code: &str) -> u16 {
    match code {
        "not_found" => 404,
        "validation_failed" => 422,
        "conflict" => 409,
        "invalid_query" | "malformed_json" | "kind_mismatch" => 400,
        _ => 500,
    }
}

impl From<LakeError> for ApiError {
    fn from(e: LakeError) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
            violations: e.violations().cloned(),
        }
    }
}

/// Canonical JSON bytes of a response payload.
pub fn to_body<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    to_canonical_bytes(value).unwrap_or_else(|e| {
        to_canonical_bytes(&ApiError::new("internal", e.to_string()))
            .expect("error bodies are always serializable")
    })
}

/// Path segment under which each record family is registered.
pub fn collection(record_type: RecordType) -> &'static str {
    match record_type {
        RecordType::User => "users",
        RecordType::Source => "sources",
        RecordType::Dataset => "datasets",
        RecordType::Environment => "environments",
        RecordType::Ingest => "ingests",
        RecordType::Process => "processes",
        RecordType::Analysis => "analyses",
        RecordType::Study => "studies",
        RecordType::Task => "tasks",
    }
}

pub fn record_type_for(collection_name: &str) -> Option<RecordType> {
    RecordType::ALL
        .into_iter()
        .find(|&t| collection(t) == collection_name)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Status,
    Search(SearchQuery),
    Lineage(String),
    Versions(String),
    Diff(String, String),
    Compliance {
        model: String,
        approved: BTreeSet<String>,
    },
    Repro(String),
    Bias(String),
    Evolution(String),
    Health {
        threshold: Option<f64>,
    },
    Project(String),
}

pub fn query(lake: &Lake, swamp_threshold: f64, q: &Query) -> Result<Value, ApiError> {
    let v = match q {
        Query::Status => json!({"status": "ok", "records": lake.record_count()}),
        Query::Search(sq) => to_value(catalog::search(lake, sq)?),
        Query::Lineage(id) => to_value(lake.lineage(id)?.export()),
        Query::Versions(id) => {
            let chain = lake.version_chain(id)?;
            let entries = chain
                .iter()
                .map(|n| Ok(json!({"node_id": n, "value": lake.node_value(n)?})))
                .collect::<Result<Vec<_>, LakeError>>()?;
            Value::Array(entries)
        }
        Query::Diff(a, b) => to_value(lake.diff_versions(a, b)?),
        Query::Compliance { model, approved } => {
            to_value(governance::audit_compliance(lake, model, approved)?)
        }
        Query::Repro(a) => to_value(governance::check_reproduction(lake, a)?),
        Query::Bias(m) => to_value(governance::bias_surface(lake, m)?),
        Query::Evolution(h) => to_value(governance::evolution_report(lake, h)?),
        Query::Health { threshold } => to_value(governance::lake_health(
            lake,
            threshold.unwrap_or(swamp_threshold),
        )?),
        Query::Project(s) => to_value(catalog::get_project_view(lake, s)?),
    };
    Ok(v)
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Write {
    Artifact {
        payload: Vec<u8>,
        kind: ArtifactKind,
    },
    Register {
        record_type: RecordType,
        body: Vec<u8>,
    },
}

/// Applies a write; returns whether it created anything and the payload.
pub fn write(lake: &mut Lake, w: Write) -> Result<(bool, Value), ApiError> {
    match w {
        Write::Artifact { payload, kind } => {
            let (meta, created) = lake.put_artifact(&payload, kind)?;
            Ok((created, to_value(meta)))
        }
        Write::Register { record_type, body } => {
            let value: Value = serde_json::from_slice(&body)
                .map_err(|e| ApiError::new("malformed_json", format!("request body: {e}")))?;
            let reg = lake.register_json(record_type, value)?;
            Ok((reg.created, json!({"node_id": reg.node_id})))
        }
    }
}

fn split_list(raw: &str) -> impl Iterator<Item = String> + '_ {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

/// Builds a search query from URL parameters. `kind` and `tag` may repeat
/// or hold comma-separated lists.
pub fn search_from_params<I, K, V>(params: I) -> Result<SearchQuery, ApiError>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut q = SearchQuery::default();
    let number = |k: &str, v: &str| {
        v.parse::<usize>()
            .map_err(|_| ApiError::invalid_query(format!("{k} must be a non-negative integer")))
    };
    for (k, v) in params {
        let (k, v) = (k.as_ref(), v.as_ref());
        match k {
            "text" => q.text = Some(v.to_string()),
            "kind" => {
                for kind in split_list(v) {
                    q.kinds.push(kind.parse().map_err(ApiError::invalid_query)?);
                }
            }
            "tag" => q.tags.extend(split_list(v)),
            "user" => q.user = Some(v.to_string()),
            "from" => q.from = Some(Timestamp::parse_lenient(v)),
            "to" => q.to = Some(Timestamp::parse_lenient(v)),
            "limit" => q.limit = Some(number(k, v)?),
            "offset" => q.offset = number(k, v)?,
            other => {
                return Err(ApiError::invalid_query(format!(
                    "unknown search parameter '{other}'"
                )))
            }
        }
    }
    Ok(q)
}

/// Inverse of [`search_from_params`].
pub fn search_params(q: &SearchQuery) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if let Some(t) = &q.text {
        out.push(("text", t.clone()));
    }
    out.extend(q.kinds.iter().map(|k| ("kind", k.to_string())));
    out.extend(q.tags.iter().map(|t| ("tag", t.clone())));
    if let Some(u) = &q.user {
        out.push(("user", u.clone()));
    }
    if let Some(f) = &q.from {
        out.push(("from", f.to_string()));
    }
    if let Some(t) = &q.to {
        out.push(("to", t.to_string()));
    }
    if let Some(l) = q.limit {
        out.push(("limit", l.to_string()));
    }
    if q.offset != 0 {
        out.push(("offset", q.offset.to_string()));
    }
    out
}

pub fn approved_from_param(raw: Option<&str>) -> BTreeSet<String> {
    raw.map(|r| split_list(r).collect()).unwrap_or_default()
}

pub fn threshold_from_param(raw: Option<&str>) -> Result<Option<f64>, ApiError> {
    raw.map(|r| {
        r.parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .ok_or_else(|| ApiError::invalid_query("threshold must be a finite number"))
    })
    .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use modellake::lineage::NodeKind;

    #[test]
    fn codes_map_to_fixed_statuses() {
        for (code, status) in [
            ("not_found", 404),
            ("validation_failed", 422),
            ("conflict", 409),
            ("invalid_query", 400),
            ("malformed_json", 400),
            ("kind_mismatch", 400),
            ("internal", 500),
        ] {
            assert_eq!(status_for(code), status);
        }
    }

    #[test]
    fn search_params_round_trip() {
        let q = SearchQuery {
            text: Some("a b, c".into()),
            kinds: vec![NodeKind::Dataset, NodeKind::Analysis],
            tags: vec!["x".into()],
            user: Some("bob".into()),
            from: Some(Timestamp::parse("2024-01-01T00:00:00Z").unwrap()),
            to: None,
            limit: Some(3),
            offset: 2,
        };
        assert_eq!(search_from_params(search_params(&q)).unwrap(), q);
        let comma = search_from_params([("kind", "dataset,analysis"), ("tag", "x")]).unwrap();
        assert_eq!(comma.kinds, q.kinds);
        assert_eq!(
            search_from_params([("bogus", "1")]).unwrap_err().code,
            "invalid_query"
        );
        assert_eq!(
            search_from_params([("kind", "spaceship")])
                .unwrap_err()
                .code,
            "invalid_query"
        );
    }

    #[test]
    fn collections_are_distinct() {
        for t in RecordType::ALL {
            assert_eq!(record_type_for(collection(t)), Some(t));
        }
        assert_eq!(record_type_for("artifacts"), None);
    }
}
