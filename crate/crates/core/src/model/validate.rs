use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{
    AnalysisRecord, DatasetSource, IngestRecord, ModelLakeDataset, ProcessRecord, Record,
    RecordType, Resolver, Study, Timestamp,
};
use crate::cas::{ArtifactKind, BlobId};

/// One broken rule. `field` is a dotted/indexed path into the record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, field: impl Into<String>, rule: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            rule: rule.to_string(),
            message: message.into(),
        });
    }

    pub fn has(&self, field: &str, rule: &str) -> bool {
        self.violations
            .iter()
            .any(|v| v.field == field && v.rule == rule)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

struct Checker<'a, R: ?Sized> {
    resolver: &'a R,
    report: ValidationReport,
}

impl<'a, R: Resolver + ?Sized> Checker<'a, R> {
    fn non_empty(&mut self, field: &str, value: &str) {
        if value.trim().is_empty() {
            self.report
                .push(field, "non_empty", format!("{field} must not be empty"));
        }
    }

    fn reference(&mut self, field: &str, target: RecordType, alias: &str) -> bool {
        if alias.trim().is_empty() {
            self.report
                .push(field, "required", format!("{field} must name a {target}"));
            return false;
        }
        if self.resolver.resolve(target, alias).is_none() {
            self.report.push(
                field,
                "unresolved_reference",
                format!("unknown {target} '{alias}'"),
            );
            return false;
        }
        true
    }

    fn optional_reference(&mut self, field: &str, target: RecordType, alias: Option<&str>) {
        if let Some(alias) = alias {
            self.reference(field, target, alias);
        }
    }

    fn blob(&mut self, field: &str, id: Option<&BlobId>, expected: ArtifactKind) {
        let Some(id) = id else {
            self.report.push(
                field,
                "required",
                format!("{field} must reference a {expected} blob"),
            );
            return;
        };
        match self.resolver.blob_kind(id) {
            None => self.report.push(
                field,
                "blob_missing",
                format!("{field} references {id}, which is not in the store"),
            ),
            Some(kind) if kind != expected => self.report.push(
                field,
                "blob_kind_mismatch",
                format!("{field} kind mismatch: {id} is stored as {kind}, expected {expected}"),
            ),
            Some(_) => {}
        }
    }

    fn timestamp(&mut self, field: &str, ts: Option<&Timestamp>, required: bool) {
        match ts {
            None if required => {
                self.report
                    .push(field, "required", format!("{field} must be present"))
            }
            Some(t) if !t.is_valid() => self.report.push(
                field,
                "timestamp_format",
                format!("{field} '{t}' is not an RFC 3339 timestamp"),
            ),
            _ => {}
        }
    }

    fn unique<'s>(&mut self, field: &str, values: impl IntoIterator<Item = &'s str>) {
        let mut seen = HashSet::new();
        for v in values {
            if !seen.insert(v) {
                self.report
                    .push(field, "unique", format!("duplicate '{v}' in {field}"));
            }
        }
    }
}

/// Checks every structural invariant and that every reference resolves.
/// Never fails: problems are returned as violations.
pub fn validate_record<R: Resolver + ?Sized>(record: &Record, resolver: &R) -> ValidationReport {
    let mut c = Checker {
        resolver,
        report: ValidationReport::default(),
    };
    let id_field = record.record_type().id_field();
    c.non_empty(id_field, record.alias());
    match record {
        Record::User(_) | Record::Environment(_) | Record::Task(_) => {}
        Record::Source(s) => source(&mut c, s),
        Record::Dataset(d) => dataset(&mut c, d),
        Record::Ingest(i) => ingest(&mut c, i),
        Record::Process(p) => process(&mut c, p),
        Record::Analysis(a) => analysis(&mut c, a),
        Record::Study(s) => study(&mut c, s),
    }
    c.report
}

fn source<R: Resolver + ?Sized>(c: &mut Checker<R>, s: &DatasetSource) {
    if !s.owner.is_empty() {
        c.reference("owner", RecordType::User, &s.owner);
    }
    c.timestamp("created_at", s.created_at.as_ref(), false);
}

fn dataset<R: Resolver + ?Sized>(c: &mut Checker<R>, d: &ModelLakeDataset) {
    c.blob("location", d.location.as_ref(), ArtifactKind::Dataset);
    c.timestamp("created_at", d.created_at.as_ref(), false);
    for (i, tag) in d.tags.iter().enumerate() {
        if !tag.is_well_formed() {
            c.report.push(
                format!("tags[{i}]"),
                "tag_format",
                "tags must be non-empty without leading or trailing whitespace",
            );
        }
    }
    let lowered: Vec<String> = d.tags.iter().map(|t| t.label().to_lowercase()).collect();
    c.unique("tags", lowered.iter().map(String::as_str));
    c.unique("attributes", d.attributes.iter().map(|a| a.name.as_str()));
    if let Some(m) = &d.metafeatures {
        for (i, a) in m.attributes.iter().enumerate() {
            if !(0.0..=1.0).contains(&a.missing_fraction) {
                c.report.push(
                    format!("metafeatures.attributes[{i}].missing_fraction"),
                    "range",
                    format!("missing_fraction {} outside [0, 1]", a.missing_fraction),
                );
            }
        }
        c.unique(
            "metafeatures.attributes",
            m.attributes.iter().map(|a| a.attribute_name.as_str()),
        );
        for (k, v) in &m.extra {
            if !v.is_finite() {
                c.report.push(
                    format!("metafeatures.extra.{k}"),
                    "finite",
                    "metafeature values must be finite",
                );
            }
        }
    }
    c.optional_reference("source", RecordType::Source, d.source.as_deref());
    if let Some(prev) = d.previous_version.as_deref() {
        if prev == d.dataset_id {
            c.report.push(
                "previous_version",
                "distinct",
                "a dataset cannot be its own previous version",
            );
        } else {
            c.reference("previous_version", RecordType::Dataset, prev);
        }
    }
}

fn ingest<R: Resolver + ?Sized>(c: &mut Checker<R>, i: &IngestRecord) {
    c.reference("from_source", RecordType::Source, &i.from_source);
    c.reference("to_dataset", RecordType::Dataset, &i.to_dataset);
    if !i.from_source.is_empty() && i.from_source == i.to_dataset {
        c.report.push(
            "to_dataset",
            "distinct",
            "to_dataset must differ from from_source",
        );
    }
    c.reference("ingested_by", RecordType::User, &i.ingested_by);
    c.timestamp("ingested_at", i.ingested_at.as_ref(), true);
    c.optional_reference(
        "environment",
        RecordType::Environment,
        i.environment.as_deref(),
    );
}

fn process<R: Resolver + ?Sized>(c: &mut Checker<R>, p: &ProcessRecord) {
    for (field, list) in [
        ("source_datasets", &p.source_datasets),
        ("target_datasets", &p.target_datasets),
    ] {
        if list.is_empty() {
            c.report.push(
                field,
                "non_empty",
                format!("{field} must list at least one dataset"),
            );
        }
        for (idx, d) in list.iter().enumerate() {
            c.reference(&format!("{field}[{idx}]"), RecordType::Dataset, d);
        }
        c.unique(field, list.iter().map(String::as_str));
    }
    let sources: HashSet<&str> = p.source_datasets.iter().map(String::as_str).collect();
    for (idx, t) in p.target_datasets.iter().enumerate() {
        if sources.contains(t.as_str()) {
            c.report.push(
                format!("target_datasets[{idx}]"),
                "disjoint",
                format!("dataset '{t}' is both a source and a target"),
            );
        }
    }
    c.blob("code", p.code.as_ref(), ArtifactKind::Code);
    c.reference("executed_by", RecordType::User, &p.executed_by);
    c.timestamp("created_at", p.created_at.as_ref(), false);
    c.timestamp("last_modified_at", p.last_modified_at.as_ref(), false);
    if let (Some(created), Some(modified)) = (
        p.created_at.as_ref().and_then(Timestamp::as_datetime),
        p.last_modified_at.as_ref().and_then(Timestamp::as_datetime),
    ) {
        if modified < created {
            c.report.push(
                "last_modified_at",
                "order",
                "last_modified_at precedes created_at",
            );
        }
    }
    let indexes: Vec<String> = p
        .operations
        .iter()
        .map(|o| o.order_index.to_string())
        .collect();
    c.unique("operations.order_index", indexes.iter().map(String::as_str));
}

fn analysis<R: Resolver + ?Sized>(c: &mut Checker<R>, a: &AnalysisRecord) {
    c.reference("performed_by", RecordType::User, &a.performed_by);
    c.optional_reference("study", RecordType::Study, a.study.as_deref());
    c.optional_reference("task", RecordType::Task, a.task.as_deref());
    c.blob("model_path", a.model_path.as_ref(), ArtifactKind::Model);
    c.blob("code", a.code.as_ref(), ArtifactKind::Code);
    match a.environment.as_deref() {
        Some(env) => {
            c.reference("environment", RecordType::Environment, env);
        }
        None => c
            .report
            .push("environment", "required", "environment must be present"),
    }
    if let Some(alg) = &a.algorithm {
        c.non_empty("algorithm.name", &alg.name);
    }
    c.unique("parameters", a.parameters.iter().map(|p| p.name.as_str()));
    for (idx, u) in a.used_datasets.iter().enumerate() {
        c.reference(
            &format!("used_datasets[{idx}].dataset"),
            RecordType::Dataset,
            &u.dataset,
        );
    }
    for (k, v) in &a.performance {
        if !v.is_finite() {
            c.report.push(
                format!("performance.{k}"),
                "finite",
                "performance values must be finite",
            );
        }
    }
    c.timestamp("performed_at", a.performed_at.as_ref(), false);
    if let Some(prev) = a.previous_version.as_deref() {
        if prev == a.analysis_id {
            c.report.push(
                "previous_version",
                "distinct",
                "an analysis cannot be its own previous version",
            );
        } else {
            c.reference("previous_version", RecordType::Analysis, prev);
        }
    }
}

fn study<R: Resolver + ?Sized>(c: &mut Checker<R>, s: &Study) {
    for (idx, a) in s.member_analyses.iter().enumerate() {
        c.reference(&format!("member_analyses[{idx}]"), RecordType::Analysis, a);
    }
    c.unique(
        "member_analyses",
        s.member_analyses.iter().map(String::as_str),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Environment, IngestMode, RecordSet, User, UserRole};

    fn lake() -> RecordSet {
        let mut set = RecordSet::new();
        let raw = BlobId::of(b"raw");
        set.insert_blob(raw.clone(), ArtifactKind::Dataset)
            .insert_blob(BlobId::of(b"code"), ArtifactKind::Code)
            .insert(Record::User(User {
                user_id: "alice".into(),
                name: "Alice".into(),
                role: UserRole::DataEngineer,
            }))
            .insert(Record::Source(DatasetSource {
                source_id: "pima".into(),
                name: "Pima".into(),
                source_type: "csv-file".into(),
                description: "clinic export".into(),
                owner: "alice".into(),
                location: "file:///pima.csv".into(),
                created_at: None,
            }))
            .insert(Record::Environment(Environment {
                env_id: "py311".into(),
                name: "python".into(),
                runtime_descriptors: Default::default(),
                hardware: String::new(),
            }))
            .insert(Record::Dataset(ModelLakeDataset {
                dataset_id: "pima-raw".into(),
                name: "Pima raw".into(),
                format: "csv".into(),
                description: String::new(),
                tags: vec![],
                attributes: vec![],
                location: Some(raw),
                created_at: None,
                metafeatures: None,
                source: Some("pima".into()),
                previous_version: None,
            }));
        set
    }

    fn ingest_record() -> IngestRecord {
        IngestRecord {
            ingest_id: "ing-1".into(),
            mode: Some(IngestMode::Batch),
            comments: "initial load".into(),
            from_source: "pima".into(),
            to_dataset: "pima-raw".into(),
            ingested_by: "alice".into(),
            access_url: "file:///pima.csv".into(),
            ingested_at: Some(Timestamp::parse("2024-05-01T12:00:00Z").unwrap()),
            environment: Some("py311".into()),
        }
    }

    #[test]
    fn resolvable_ingest_is_clean() {
        let r = validate_record(&Record::Ingest(ingest_record()), &lake());
        assert!(r.is_empty(), "{r}");
    }

    #[test]
    fn ingest_into_its_own_source_is_one_violation() {
        let mut set = lake();
        // Make "pima" resolvable as a dataset too, so only the distinctness rule fires.
        set.insert(Record::Dataset(ModelLakeDataset {
            dataset_id: "pima".into(),
            name: "x".into(),
            format: String::new(),
            description: String::new(),
            tags: vec![],
            attributes: vec![],
            location: Some(BlobId::of(b"raw")),
            created_at: None,
            metafeatures: None,
            source: None,
            previous_version: None,
        }));
        let mut i = ingest_record();
        i.to_dataset = "pima".into();
        let r = validate_record(&Record::Ingest(i), &set);
        assert_eq!(r.violations.len(), 1, "{r}");
        assert!(r.has("to_dataset", "distinct"));
    }

    #[test]
    fn unknown_user_is_named() {
        let mut i = ingest_record();
        i.ingested_by = "mallory".into();
        let r = validate_record(&Record::Ingest(i), &lake());
        assert!(r.has("ingested_by", "unresolved_reference"));
        assert!(r.violations[0].message.contains("mallory"));
    }

    #[test]
    fn malformed_timestamp_is_a_violation() {
        let mut i = ingest_record();
        i.ingested_at = Some(Timestamp::parse_lenient("last tuesday"));
        let r = validate_record(&Record::Ingest(i), &lake());
        assert!(r.has("ingested_at", "timestamp_format"));
    }

    #[test]
    fn process_rules() {
        let p = ProcessRecord {
            process_id: "clean".into(),
            name: "clean".into(),
            description: String::new(),
            language_program: "python".into(),
            code: Some(BlobId::of(b"raw")),
            created_at: Some(Timestamp::parse("2024-05-02T00:00:00Z").unwrap()),
            last_modified_at: Some(Timestamp::parse("2024-05-01T00:00:00Z").unwrap()),
            source_datasets: vec!["pima-raw".into()],
            target_datasets: vec!["pima-raw".into()],
            operations: vec![],
            executed_by: "alice".into(),
        };
        let r = validate_record(&Record::Process(p), &lake());
        assert!(r.has("target_datasets[0]", "disjoint"));
        assert!(r.has("code", "blob_kind_mismatch"));
        assert!(r.has("last_modified_at", "order"));
    }

    #[test]
    fn fixing_a_violation_removes_exactly_it() {
        let mut i = ingest_record();
        i.ingested_by = "mallory".into();
        i.ingested_at = None;
        let before = validate_record(&Record::Ingest(i.clone()), &lake());
        assert_eq!(before.violations.len(), 2);
        i.ingested_at = Some(Timestamp::now());
        let after = validate_record(&Record::Ingest(i), &lake());
        assert_eq!(after.violations.len(), 1);
        assert!(after.has("ingested_by", "unresolved_reference"));
    }
}
