//! Top-k retrieval: an in-process BM25 index and precomputed TREC run files.

pub mod bm25;
pub mod run_file;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
}

/// The ordered top-k documents for one query.
///
/// Entries are sorted by score descending, ties broken by doc id ascending,
/// with distinct doc ids and at most `k` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
    pub k: usize,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, entries: Vec<RankedEntry>, k: usize) -> Result<Self> {
        let list = RankedList {
            query_id: query_id.into(),
            entries,
            k,
        };
        list.check_invariants()?;
        Ok(list)
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.doc_id.clone()).collect()
    }

    fn check_invariants(&self) -> Result<()> {
        if self.entries.len() > self.k {
            return Err(Error::invalid(
                "ranked list",
                format!(
                    "{} entries exceed k={} for query {}",
                    self.entries.len(),
                    self.k,
                    self.query_id
                ),
            ));
        }
        for pair in self.entries.windows(2) {
            if !entry_order_ok(&pair[0], &pair[1]) {
                return Err(Error::invalid(
                    "ranked list",
                    format!("entries out of order for query {}", self.query_id),
                ));
            }
        }
        let mut ids: Vec<&str> = self.entries.iter().map(|e| e.doc_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.entries.len() {
            return Err(Error::invalid(
                "ranked list",
                format!("duplicate doc ids for query {}", self.query_id),
            ));
        }
        Ok(())
    }
}

fn entry_order_ok(a: &RankedEntry, b: &RankedEntry) -> bool {
    a.score > b.score || (a.score == b.score && a.doc_id < b.doc_id)
}

/// Sort entries by score descending, ties broken by doc id ascending.
pub fn sort_entries(entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
}

/// Rebuild a ranked list of length `k` with `relevant_doc` placed at a
/// seeded uniformly random position and the top non-relevant entries of the
/// input filling the remaining slots in order.
///
/// Entry scores are replaced by rank-derived placeholders (`k - position`)
/// since the injected document has no retrieval score of its own.
pub fn place_relevant_random(
    list: &RankedList,
    relevant_doc: &str,
    k: usize,
    seed: u64,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::invalid("placement", "k must be at least 1"));
    }
    let nonrelevant: Vec<&RankedEntry> = list
        .entries
        .iter()
        .filter(|e| e.doc_id != relevant_doc)
        .collect();
    if nonrelevant.len() < k - 1 {
        return Err(Error::invalid(
            "placement",
            format!(
                "need {} non-relevant candidates for k={k}, query {} has {}",
                k - 1,
                list.query_id,
                nonrelevant.len()
            ),
        ));
    }
    let mut rng = derive_rng(seed, &format!("place_relevant/{}", list.query_id));
    let position = rng.random_range(0..k);
    let mut docs: Vec<String> = Vec::with_capacity(k);
    let mut fill = nonrelevant.iter();
    for i in 0..k {
        if i == position {
            docs.push(relevant_doc.to_string());
        } else {
            docs.push(fill.next().expect("checked candidate count").doc_id.clone());
        }
    }
    let entries = docs
        .into_iter()
        .enumerate()
        .map(|(i, doc_id)| RankedEntry {
            doc_id,
            score: (k - i) as f64,
        })
        .collect();
    RankedList::new(list.query_id.clone(), entries, k)
}
