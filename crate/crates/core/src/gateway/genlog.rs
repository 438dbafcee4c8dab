//! Append-only JSONL log of generations, one record per (query, condition).
//!
//! The log is the durable boundary of a run: scoring and aggregation replay
//! from it, and interrupted runs resume by skipping tags already present.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::gateway::{RawGeneration, RequestTag};

pub struct GenerationLog {
    path: PathBuf,
    writer: Mutex<BufWriter<File>>,
}

impl GenerationLog {
    /// Open the log for appending, creating it if needed.
    pub fn open_append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(GenerationLog {
            path: path.to_path_buf(),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    /// Append one record and flush. Serialized through a single writer so
    /// concurrent producers cannot interleave lines.
    pub fn append(&self, record: &RawGeneration) -> Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::invalid("generation log", e.to_string()))?;
        let mut writer = self.writer.lock().expect("log writer poisoned");
        writeln!(writer, "{line}").map_err(|e| Error::io(&self.path, e))?;
        writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(())
    }

    /// Read a log into a map keyed by tag. Duplicate tags keep the first
    /// record and warn; at-most-once accounting treats the first write as
    /// authoritative.
    pub fn read_index(path: &Path) -> Result<BTreeMap<RequestTag, RawGeneration>> {
        let mut index = BTreeMap::new();
        if !path.exists() {
            return Ok(index);
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RawGeneration = serde_json::from_str(&line)
                .map_err(|e| Error::malformed(path, i + 1, e.to_string()))?;
            if index.contains_key(&record.tag) {
                log::warn!("{}: duplicate log entry for {}, first wins", path.display(), record.tag);
                continue;
            }
            index.insert(record.tag.clone(), record);
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(qid: &str, cond: &str) -> RawGeneration {
        RawGeneration {
            text: format!("answer for {qid}"),
            tokens: None,
            model_id: "test".into(),
            tag: RequestTag::new(qid, cond),
            logprobs_missing: false,
        }
    }

    #[test]
    fn append_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.jsonl");
        let log = GenerationLog::open_append(&path).unwrap();
        log.append(&record("q1", "vanilla")).unwrap();
        log.append(&record("q2", "vanilla")).unwrap();
        drop(log);
        // Reopen and append more: the earlier records survive.
        let log = GenerationLog::open_append(&path).unwrap();
        log.append(&record("q1", "informed")).unwrap();
        drop(log);
        let index = GenerationLog::read_index(&path).unwrap();
        assert_eq!(index.len(), 3);
        assert!(index.contains_key(&RequestTag::new("q1", "vanilla")));
        assert!(index.contains_key(&RequestTag::new("q1", "informed")));
    }

    #[test]
    fn duplicate_tags_keep_first() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.jsonl");
        let log = GenerationLog::open_append(&path).unwrap();
        let mut first = record("q1", "vanilla");
        first.text = "first".into();
        let mut second = record("q1", "vanilla");
        second.text = "second".into();
        log.append(&first).unwrap();
        log.append(&second).unwrap();
        drop(log);
        let index = GenerationLog::read_index(&path).unwrap();
        assert_eq!(index.len(), 1);
        assert_eq!(index[&RequestTag::new("q1", "vanilla")].text, "first");
    }

    #[test]
    fn missing_log_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let index = GenerationLog::read_index(&dir.path().join("absent.jsonl")).unwrap();
        assert!(index.is_empty());
    }
}
