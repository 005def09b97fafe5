use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::LineageGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldChange {
    pub field: String,
    pub value_a: Value,
    pub value_b: Value,
}

/// One side of a differing upstream node; paired when the two nodes are
/// versions of each other.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UpstreamChange {
    pub a: Option<String>,
    pub b: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionDiff {
    pub a: String,
    pub b: String,
    pub changed_fields: Vec<FieldChange>,
    pub changed_upstream: Vec<UpstreamChange>,
}

impl VersionDiff {
    pub fn is_empty(&self) -> bool {
        self.changed_fields.is_empty() && self.changed_upstream.is_empty()
    }
}

/// Flattens a JSON document into `path -> scalar` leaves. Arrays of objects
/// that all carry a distinct string `name` are keyed by that name, so
/// reordering named parameters is not a change.
pub fn flatten(value: &Value) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    flatten_into(&mut out, String::new(), value);
    out
}

fn flatten_into(out: &mut BTreeMap<String, Value>, path: String, value: &Value) {
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                flatten_into(out, p, v);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            let names: Option<Vec<&str>> = items
                .iter()
                .map(|i| i.get("name").and_then(Value::as_str))
                .collect();
            let keyed = names.filter(|n| n.iter().collect::<HashSet<_>>().len() == n.len());
            for (idx, item) in items.iter().enumerate() {
                let key = match &keyed {
                    Some(names) => names[idx].to_string(),
                    None => idx.to_string(),
                };
                flatten_into(out, format!("{path}[{key}]"), item);
            }
        }
        leaf => {
            out.insert(path, leaf.clone());
        }
    }
}

/// Leaf-wise comparison, skipping the given top-level fields.
pub fn diff_fields(a: &Value, b: &Value, ignored: &[&str]) -> Vec<FieldChange> {
    let skip = |path: &str| {
        ignored.iter().any(|f| {
            path == *f || path.starts_with(&format!("{f}.")) || path.starts_with(&format!("{f}["))
        })
    };
    let fa = flatten(a);
    let fb = flatten(b);
    let keys: BTreeSet<&String> = fa.keys().chain(fb.keys()).collect();
    keys.into_iter()
        .filter(|k| !skip(k))
        .filter_map(|k| {
            let va = fa.get(k).cloned().unwrap_or(Value::Null);
            let vb = fb.get(k).cloned().unwrap_or(Value::Null);
            (va != vb).then(|| FieldChange {
                field: k.clone(),
                value_a: va,
                value_b: vb,
            })
        })
        .collect()
}

/// Symmetric difference of two upstream sets, pairing nodes that sit on the
/// same version chain.
pub fn pair_upstream(
    graph: &LineageGraph,
    only_a: &BTreeSet<String>,
    only_b: &BTreeSet<String>,
) -> Vec<UpstreamChange> {
    let mut unmatched_b = only_b.clone();
    let mut out = Vec::new();
    for x in only_a {
        let chain = graph.version_chain(x).unwrap_or_default();
        let partner = chain.iter().find(|c| unmatched_b.contains(*c)).cloned();
        if let Some(y) = &partner {
            unmatched_b.remove(y);
        }
        out.push(UpstreamChange {
            a: Some(x.clone()),
            b: partner,
        });
    }
    // Second pass: a lone unpaired node of some kind on each side is a
    // replacement (e.g. a new code blob), so pair those too.
    let kind = |id: &str| graph.node(id).map(|n| n.node_kind);
    for change in out.iter_mut().filter(|c| c.b.is_none()) {
        let k = kind(change.a.as_deref().expect("first pass sets a"));
        let same_a = only_a.iter().filter(|x| kind(x) == k).count();
        let cands: Vec<&String> = unmatched_b.iter().filter(|y| kind(y) == k).collect();
        if same_a == 1 && cands.len() == 1 {
            let y = cands[0].clone();
            unmatched_b.remove(&y);
            change.b = Some(y);
        }
    }
    out.extend(unmatched_b.into_iter().map(|y| UpstreamChange {
        a: None,
        b: Some(y),
    }));
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn named_arrays_are_keyed_by_name() {
        let a = json!({"parameters": [{"name": "depth", "value": "3"}, {"name": "lr", "value": "0.1"}]});
        let b = json!({"parameters": [{"name": "lr", "value": "0.1"}, {"name": "depth", "value": "4"}]});
        let d = diff_fields(&a, &b, &[]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "parameters[depth].value");
        assert_eq!(d[0].value_a, json!("3"));
        assert_eq!(d[0].value_b, json!("4"));
    }

    #[test]
    fn ignored_fields_and_absence() {
        let a = json!({"analysis_id": "a", "task": "t", "x": {"y": 1}});
        let b = json!({"analysis_id": "b", "x": {"y": 1}});
        let d = diff_fields(&a, &b, &["analysis_id"]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "task");
        assert_eq!(d[0].value_b, Value::Null);
    }

    #[test]
    fn identical_values_have_no_diff() {
        let a = json!({"m": {"acc": 0.8}, "l": [1, 2]});
        assert!(diff_fields(&a, &a, &[]).is_empty());
    }
}
