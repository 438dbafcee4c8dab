//! Okapi BM25 over an in-memory inverted index.
//!
//! Tokenization is lowercase with splits on non-alphanumeric characters, no
//! stemming and no stopword removal. Query terms are deduplicated; scores use
//! the non-negative idf variant `ln(1 + (N - df + 0.5) / (df + 0.5))`. Term
//! contributions are summed in sorted term order so scores are reproducible
//! bit for bit.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Query};
use crate::error::{Error, Result};
use crate::retrieval::{sort_entries, RankedEntry, RankedList};

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) {
            return Err(Error::invalid("bm25 params", format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::invalid("bm25 params", format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Posting {
    doc: u32,
    tf: u32,
}

/// Immutable inverted index: per-term postings with term frequencies plus
/// document lengths and the average document length.
#[derive(Debug)]
pub struct Index {
    postings: HashMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    avgdl: f64,
}

impl Index {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Number of documents containing `term` (after tokenization).
    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, |p| p.len())
    }
}

/// Build an index over the given documents. Iteration order fixes internal
/// doc numbering, so pass an ordered collection.
pub fn build_index<'a, I>(docs: I) -> Result<Index>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_ids = Vec::new();
    let mut doc_len = Vec::new();
    let mut total_len = 0u64;
    for doc in docs {
        let idx = doc_ids.len() as u32;
        doc_ids.push(doc.doc_id.clone());
        let tokens = tokenize(&doc.text);
        total_len += tokens.len() as u64;
        doc_len.push(tokens.len() as u32);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in tokens {
            *tf.entry(t).or_insert(0) += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push(Posting { doc: idx, tf: count });
        }
    }
    if doc_ids.is_empty() {
        return Err(Error::invalid("bm25 index", "collection is empty"));
    }
    Ok(Index {
        postings,
        avgdl: total_len as f64 / doc_ids.len() as f64,
        doc_ids,
        doc_len,
    })
}

fn idf(n_docs: usize, df: usize) -> f64 {
    (1.0 + (n_docs as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

fn term_weight(tf: u32, doc_len: u32, avgdl: f64, params: Bm25Params) -> f64 {
    let tf = tf as f64;
    tf * (params.k1 + 1.0)
        / (tf + params.k1 * (1.0 - params.b + params.b * doc_len as f64 / avgdl))
}

/// Score the collection against `query` and return the top `k` documents.
/// A query sharing no term with any document yields an empty list.
pub fn retrieve(index: &Index, query: &Query, k: usize, params: Bm25Params) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::invalid("retrieve", "k must be at least 1"));
    }
    params.validate()?;
    let terms: BTreeSet<String> = tokenize(&query.text).into_iter().collect();
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for term in &terms {
        let Some(postings) = index.postings.get(term) else {
            continue;
        };
        let w = idf(index.n_docs(), postings.len());
        for p in postings {
            *scores.entry(p.doc).or_insert(0.0) +=
                w * term_weight(p.tf, index.doc_len[p.doc as usize], index.avgdl, params);
        }
    }
    let mut entries: Vec<RankedEntry> = scores
        .into_iter()
        .map(|(doc, score)| RankedEntry {
            doc_id: index.doc_ids[doc as usize].clone(),
            score,
        })
        .collect();
    sort_entries(&mut entries);
    entries.truncate(k);
    RankedList::new(query.query_id.clone(), entries, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AuthorKind;

    fn doc(id: &str, text: &str) -> Document {
        Document {
            doc_id: id.into(),
            text: text.into(),
            actual_author: AuthorKind::Human,
            paraphrase_of: None,
        }
    }

    fn query(text: &str) -> Query {
        Query {
            query_id: "q".into(),
            text: text.into(),
            gold_answers: vec!["x".into()],
        }
    }

    fn toy_corpus() -> Vec<Document> {
        vec![
            doc("d1", "the quick brown fox"),
            doc("d2", "the lazy dog sleeps"),
            doc("d3", "quick quick foxes jump over the dog"),
            doc("d4", "a completely different passage"),
            doc("d5", "brown bears and brown foxes"),
        ]
    }

    #[test]
    fn shared_term_builds_two_postings() {
        let docs = vec![doc("a", "shared token"), doc("b", "shared word")];
        let index = build_index(docs.iter()).unwrap();
        assert_eq!(index.doc_frequency("shared"), 2);
        assert_eq!(index.doc_frequency("token"), 1);
    }

    #[test]
    fn stopwords_are_indexed() {
        let docs = vec![doc("a", "the of and")];
        let index = build_index(docs.iter()).unwrap();
        assert_eq!(index.doc_frequency("the"), 1);
        assert_eq!(index.doc_frequency("of"), 1);
    }

    #[test]
    fn document_frequencies_match_brute_force() {
        let docs = toy_corpus();
        let index = build_index(docs.iter()).unwrap();
        let mut vocab = BTreeSet::new();
        for d in &docs {
            vocab.extend(tokenize(&d.text));
        }
        for term in vocab {
            let brute = docs
                .iter()
                .filter(|d| tokenize(&d.text).contains(&term))
                .count();
            assert_eq!(index.doc_frequency(&term), brute, "term {term}");
        }
    }

    #[test]
    fn empty_collection_is_an_error() {
        assert!(build_index(std::iter::empty()).is_err());
    }

    #[test]
    fn zero_overlap_query_returns_empty() {
        let docs = toy_corpus();
        let index = build_index(docs.iter()).unwrap();
        let list = retrieve(&index, &query("zebra quux"), 3, Bm25Params::default()).unwrap();
        assert!(list.entries.is_empty());
    }

    #[test]
    fn single_doc_score_matches_hand_computation() {
        // One document "quick brown fox", query "fox": tf=1, dl=3, avgdl=3,
        // N=1, df=1. idf = ln(1 + 0.5/1.5), weight = 1*(k1+1)/(1 + k1*(1-b+b)).
        let docs = vec![doc("d1", "quick brown fox")];
        let index = build_index(docs.iter()).unwrap();
        let params = Bm25Params::default();
        let list = retrieve(&index, &query("fox"), 1, params).unwrap();
        assert_eq!(list.entries.len(), 1);
        assert_eq!(list.entries[0].doc_id, "d1");
        let expected = (1.0f64 + 0.5 / 1.5).ln() * (1.0 * (0.9 + 1.0) / (1.0 + 0.9));
        assert!((list.entries[0].score - expected).abs() < 1e-12);
    }

    #[test]
    fn ranking_matches_brute_force_on_toy_corpus() {
        let docs = toy_corpus();
        let index = build_index(docs.iter()).unwrap();
        let params = Bm25Params::default();
        let q = query("quick brown dog");
        let list = retrieve(&index, &q, 3, params).unwrap();

        // Brute force: score all docs directly from the formula, sort, cut.
        let n = docs.len();
        let avgdl = docs.iter().map(|d| tokenize(&d.text).len()).sum::<usize>() as f64 / n as f64;
        let terms: BTreeSet<String> = tokenize(&q.text).into_iter().collect();
        let mut entries: Vec<RankedEntry> = docs
            .iter()
            .map(|d| {
                let tokens = tokenize(&d.text);
                let mut score = 0.0;
                for term in &terms {
                    let df = docs
                        .iter()
                        .filter(|other| tokenize(&other.text).contains(term))
                        .count();
                    let tf = tokens.iter().filter(|t| *t == term).count() as u32;
                    if tf > 0 {
                        score += idf(n, df) * term_weight(tf, tokens.len() as u32, avgdl, params);
                    }
                }
                RankedEntry {
                    doc_id: d.doc_id.clone(),
                    score,
                }
            })
            .filter(|e| e.score > 0.0)
            .collect();
        sort_entries(&mut entries);
        entries.truncate(3);
        assert_eq!(list.entries, entries);
    }

    #[test]
    fn score_is_monotone_in_term_frequency() {
        let params = Bm25Params::default();
        let mut last = 0.0;
        for tf in 1..20 {
            let w = term_weight(tf, 50, 40.0, params);
            assert!(w > last, "tf={tf}");
            last = w;
        }
    }
}
