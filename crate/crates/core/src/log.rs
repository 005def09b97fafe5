//! Append-only record log, one canonical JSON entry per line.
//!
//! The log is the single source of truth: the lineage graph and the search
//! index are rebuilt from it on open. An entry is durable once `append`
//! returns. A torn final line (crash mid-write) is truncated on open.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LakeError, Result};
use crate::model::canonical::value_to_canonical_bytes;
use crate::model::RecordType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(rename = "type")]
    pub record_type: RecordType,
    pub record: Value,
}

#[derive(Debug)]
pub struct RecordLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl RecordLog {
    /// Opens the log and returns it with every committed entry.
    pub fn open(path: impl Into<PathBuf>) -> Result<(Self, Vec<LogEntry>)> {
        let path = path.into();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let (entries, good_len) = read_entries(&file)?;
        if good_len < file.metadata()?.len() {
            tracing::warn!(path = %path.display(), "truncating torn tail of record log");
            file.set_len(good_len)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let next_seq = entries.len() as u64;
        Ok((
            Self {
                path,
                file,
                next_seq,
            },
            entries,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.next_seq == 0
    }

    /// Appends and fsyncs one entry; returns its sequence number.
    pub fn append(&mut self, record_type: RecordType, record: Value) -> Result<u64> {
        let entry = LogEntry {
            seq: self.next_seq,
            record_type,
            record,
        };
        let mut line = value_to_canonical_bytes(
            &serde_json::to_value(&entry).expect("log entries serialize infallibly"),
        );
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.next_seq += 1;
        Ok(entry.seq)
    }
}

fn read_entries(file: &File) -> Result<(Vec<LogEntry>, u64)> {
    let mut reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut good_len = 0u64;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        if buf.last() != Some(&b'\n') {
            // Torn write: the entry was never acknowledged.
            break;
        }
        let line = entries.len() + 1;
        let entry: LogEntry =
            serde_json::from_slice(&buf[..n - 1]).map_err(|e| LakeError::LogCorrupt {
                line,
                reason: e.to_string(),
            })?;
        if entry.seq != entries.len() as u64 {
            return Err(LakeError::LogCorrupt {
                line,
                reason: format!("expected seq {}, found {}", entries.len(), entry.seq),
            });
        }
        entries.push(entry);
        good_len += n as u64;
    }
    Ok((entries, good_len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn entries_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let (mut log, entries) = RecordLog::open(&path).unwrap();
        assert!(entries.is_empty());
        log.append(RecordType::Task, json!({"task_id": "t1"}))
            .unwrap();
        log.append(RecordType::Task, json!({"task_id": "t2"}))
            .unwrap();
        drop(log);
        let (log, entries) = RecordLog::open(&path).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(entries[1].record["task_id"], "t2");
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let (mut log, _) = RecordLog::open(&path).unwrap();
        log.append(RecordType::Task, json!({"task_id": "t1"}))
            .unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"record":{"task_id":"#).unwrap();
        drop(f);
        let (mut log, entries) = RecordLog::open(&path).unwrap();
        assert_eq!(entries.len(), 1);
        log.append(RecordType::Task, json!({"task_id": "t2"}))
            .unwrap();
        drop(log);
        assert_eq!(RecordLog::open(&path).unwrap().1.len(), 2);
    }

    #[test]
    fn garbage_in_the_middle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(
            RecordLog::open(&path),
            Err(LakeError::LogCorrupt { line: 1, .. })
        ));
    }
}
