//! TREC run file parsing and writing.
//!
//! Row format: `query_id Q0 doc_id rank score tag`, whitespace-separated.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::retrieval::{sort_entries, RankedEntry, RankedList};

/// Load ranked lists from a TREC run file, keeping the first `k` rows per
/// query by rank. Lists are re-sorted to score order (doc id breaking ties);
/// if that disagrees with the rank column a warning is emitted and score
/// order wins.
pub fn load_run_file(path: &Path, k: usize) -> Result<BTreeMap<String, RankedList>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: BTreeMap<String, Vec<(u32, RankedEntry)>> = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::malformed(
                path,
                lineno,
                format!("expected 6 columns, got {}", cols.len()),
            ));
        }
        let rank: u32 = cols[3].parse().map_err(|_| {
            Error::malformed(path, lineno, format!("rank must be an integer, got {:?}", cols[3]))
        })?;
        let score: f64 = cols[4].parse().map_err(|_| {
            Error::malformed(path, lineno, format!("score must be a number, got {:?}", cols[4]))
        })?;
        rows.entry(cols[0].to_string()).or_default().push((
            rank,
            RankedEntry {
                doc_id: cols[2].to_string(),
                score,
            },
        ));
    }

    let mut lists = BTreeMap::new();
    for (query_id, mut entries) in rows {
        entries.sort_by_key(|(rank, _)| *rank);
        entries.truncate(k);
        let by_rank: Vec<String> = entries.iter().map(|(_, e)| e.doc_id.clone()).collect();
        let mut entries: Vec<RankedEntry> = entries.into_iter().map(|(_, e)| e).collect();
        sort_entries(&mut entries);
        if entries.iter().map(|e| &e.doc_id).ne(by_rank.iter()) {
            log::warn!(
                "{}: rank and score order disagree for query {query_id}; score order wins",
                path.display()
            );
        }
        let list = RankedList::new(query_id.clone(), entries, k).map_err(|e| {
            Error::invalid("run file", format!("{}: {e}", path.display()))
        })?;
        lists.insert(query_id, list);
    }
    Ok(lists)
}

/// Write ranked lists in TREC run format.
pub fn write_run_file<'a, I>(lists: I, path: &Path, tag: &str) -> Result<()>
where
    I: IntoIterator<Item = &'a RankedList>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for list in lists {
        for (i, entry) in list.entries.iter().enumerate() {
            writeln!(
                w,
                "{} Q0 {} {} {} {tag}",
                list.query_id,
                entry.doc_id,
                i + 1,
                entry.score
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
