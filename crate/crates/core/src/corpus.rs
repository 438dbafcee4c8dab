//! Benchmark corpora: queries, passages, and relevance judgments.
//!
//! Queries and documents are loaded from JSONL, qrels from the 4-column TREC
//! format. Everything is validated on load (unique identifiers, resolved
//! cross-references, paraphrase linkage) and immutable afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_rng;

/// Who actually produced a document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorKind {
    Human,
    Llm,
}

impl AuthorKind {
    pub fn flipped(self) -> Self {
        match self {
            AuthorKind::Human => AuthorKind::Llm,
            AuthorKind::Llm => AuthorKind::Human,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AuthorKind::Human => "human",
            AuthorKind::Llm => "llm",
        }
    }
}

/// A passage with provenance. `paraphrase_of` links a synthetic rewrite back
/// to its human-written source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub actual_author: AuthorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrase_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    pub gold_answers: Vec<String>,
}

/// Relevance judgments keyed by (query, document). A grade greater than zero
/// means relevant; graded judgments collapse to binary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) {
        self.grades
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), grade);
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id) > 0
    }

    /// Doc ids judged relevant (grade > 0) for a query, in id order.
    pub fn relevant_docs(&self, query_id: &str) -> Vec<&str> {
        self.grades
            .get(query_id)
            .map(|m| {
                m.iter()
                    .filter(|(_, &g)| g > 0)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.grades.iter().flat_map(|(q, docs)| {
            docs.iter()
                .map(move |(d, &g)| (q.as_str(), d.as_str(), g))
        })
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// A validated benchmark: queries, collection, and qrels with all
/// cross-references resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub queries: Vec<Query>,
    pub collection: BTreeMap<String, Document>,
    pub qrels: Qrels,
}

impl Benchmark {
    pub fn query(&self, query_id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.query_id == query_id)
    }

    /// Check every invariant the loader enforces. Useful for benchmarks
    /// assembled in memory.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for q in &self.queries {
            if !seen.insert(q.query_id.as_str()) {
                return Err(Error::DuplicateId {
                    what: "query",
                    id: q.query_id.clone(),
                });
            }
            if q.gold_answers.is_empty() {
                return Err(Error::invalid(
                    "query",
                    format!("{} has no gold answers", q.query_id),
                ));
            }
        }
        for (id, doc) in &self.collection {
            if id != &doc.doc_id {
                return Err(Error::invalid(
                    "document",
                    format!("map key {id} does not match doc_id {}", doc.doc_id),
                ));
            }
            if doc.text.is_empty() {
                return Err(Error::invalid("document", format!("{id} has empty text")));
            }
            if let Some(src) = &doc.paraphrase_of {
                let source = self.collection.get(src).ok_or_else(|| Error::DanglingRef {
                    what: "paraphrase_of document",
                    id: src.clone(),
                })?;
                if source.actual_author != AuthorKind::Human {
                    return Err(Error::invalid(
                        "document",
                        format!("{id} paraphrases {src}, which is not human-written"),
                    ));
                }
                if doc.actual_author != AuthorKind::Llm {
                    return Err(Error::invalid(
                        "document",
                        format!("{id} has paraphrase_of but is not llm-authored"),
                    ));
                }
            }
        }
        for (qid, did, _) in self.qrels.iter() {
            if !seen.contains(qid) {
                return Err(Error::DanglingRef {
                    what: "qrels query",
                    id: qid.to_string(),
                });
            }
            if !self.collection.contains_key(did) {
                return Err(Error::DanglingRef {
                    what: "qrels document",
                    id: did.to_string(),
                });
            }
        }
        Ok(())
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines())
}

/// Parse a queries JSONL file: one `{"query_id", "text", "gold_answers"}`
/// object per line.
pub fn load_queries(path: &Path) -> Result<Vec<Query>> {
    let mut queries = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in open_lines(path)?.enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let q: Query = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, lineno, e.to_string()))?;
        if q.gold_answers.is_empty() {
            return Err(Error::malformed(
                path,
                lineno,
                format!("query {} has empty gold_answers", q.query_id),
            ));
        }
        if !seen.insert(q.query_id.clone()) {
            return Err(Error::DuplicateId {
                what: "query",
                id: q.query_id,
            });
        }
        queries.push(q);
    }
    Ok(queries)
}

/// Parse a collection JSONL file into a map keyed by doc id.
pub fn load_collection(path: &Path) -> Result<BTreeMap<String, Document>> {
    let mut docs = BTreeMap::new();
    for (i, line) in open_lines(path)?.enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, lineno, e.to_string()))?;
        if doc.text.is_empty() {
            return Err(Error::malformed(
                path,
                lineno,
                format!("document {} has empty text", doc.doc_id),
            ));
        }
        if docs.contains_key(&doc.doc_id) {
            return Err(Error::DuplicateId {
                what: "document",
                id: doc.doc_id,
            });
        }
        docs.insert(doc.doc_id.clone(), doc);
    }
    Ok(docs)
}

/// Parse a whitespace-separated TREC qrels file:
/// `query_id iteration doc_id grade`. The iteration column is ignored.
pub fn load_qrels(path: &Path) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (i, line) in open_lines(path)?.enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::malformed(
                path,
                lineno,
                format!("expected 4 columns, got {}", cols.len()),
            ));
        }
        let grade: u32 = cols[3].parse().map_err(|_| {
            Error::malformed(
                path,
                lineno,
                format!("grade must be a non-negative integer, got {:?}", cols[3]),
            )
        })?;
        if qrels
            .grades
            .get(cols[0])
            .is_some_and(|m| m.contains_key(cols[2]))
        {
            log::warn!(
                "{}:{lineno}: duplicate qrels row ({}, {}), last grade wins",
                path.display(),
                cols[0],
                cols[2]
            );
        }
        qrels.insert(cols[0], cols[2], grade);
    }
    Ok(qrels)
}

/// Load and validate a full benchmark from its three files.
pub fn load_benchmark(
    queries_path: &Path,
    collection_path: &Path,
    qrels_path: &Path,
) -> Result<Benchmark> {
    let bench = Benchmark {
        queries: load_queries(queries_path)?,
        collection: load_collection(collection_path)?,
        qrels: load_qrels(qrels_path)?,
    };
    bench.validate()?;
    Ok(bench)
}

/// Write a benchmark back out in the exact on-disk formats `load_benchmark`
/// reads.
pub fn save_benchmark(
    bench: &Benchmark,
    queries_path: &Path,
    collection_path: &Path,
    qrels_path: &Path,
) -> Result<()> {
    let mut qf = BufWriter::new(File::create(queries_path).map_err(|e| Error::io(queries_path, e))?);
    for q in &bench.queries {
        serde_json::to_writer(&mut qf, q).map_err(|e| Error::io(queries_path, e.into()))?;
        writeln!(qf).map_err(|e| Error::io(queries_path, e))?;
    }
    qf.flush().map_err(|e| Error::io(queries_path, e))?;

    let mut cf =
        BufWriter::new(File::create(collection_path).map_err(|e| Error::io(collection_path, e))?);
    for doc in bench.collection.values() {
        serde_json::to_writer(&mut cf, doc).map_err(|e| Error::io(collection_path, e.into()))?;
        writeln!(cf).map_err(|e| Error::io(collection_path, e))?;
    }
    cf.flush().map_err(|e| Error::io(collection_path, e))?;

    let mut rf = BufWriter::new(File::create(qrels_path).map_err(|e| Error::io(qrels_path, e))?);
    for (qid, did, grade) in bench.qrels.iter() {
        writeln!(rf, "{qid} 0 {did} {grade}").map_err(|e| Error::io(qrels_path, e))?;
    }
    rf.flush().map_err(|e| Error::io(qrels_path, e))?;
    Ok(())
}

/// Keep exactly the queries whose context holds a single relevant document.
///
/// `contexts` maps query id to the ordered doc ids of its retrieved context.
/// Queries missing from `contexts` are skipped with a warning. Output order
/// follows `bench.queries`.
pub fn filter_single_relevant(
    bench: &Benchmark,
    contexts: &BTreeMap<String, Vec<String>>,
) -> Vec<String> {
    let mut retained = Vec::new();
    for q in &bench.queries {
        let Some(ctx) = contexts.get(&q.query_id) else {
            log::warn!(
                "filter_single_relevant: query {} has no context, skipped",
                q.query_id
            );
            continue;
        };
        let n_relevant = ctx
            .iter()
            .filter(|d| bench.qrels.is_relevant(&q.query_id, d))
            .count();
        if n_relevant == 1 {
            retained.push(q.query_id.clone());
        }
    }
    retained
}

/// Sample `n` ids uniformly without replacement, deterministically in `seed`.
///
/// The sample is the length-`n` prefix of a seeded permutation, so samples of
/// increasing size under one seed are nested.
pub fn sample_ids(ids: &[String], n: usize, seed: u64) -> Result<Vec<String>> {
    if n > ids.len() {
        return Err(Error::Config(format!(
            "sample size {n} exceeds population size {}",
            ids.len()
        )));
    }
    let mut perm: Vec<String> = ids.to_vec();
    let mut rng = derive_rng(seed, "sample_queries");
    perm.shuffle(&mut rng);
    perm.truncate(n);
    Ok(perm)
}

/// Sample `n` query ids from a benchmark. See [`sample_ids`].
pub fn sample_queries(bench: &Benchmark, n: usize, seed: u64) -> Result<Vec<String>> {
    let ids: Vec<String> = bench.queries.iter().map(|q| q.query_id.clone()).collect();
    sample_ids(&ids, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    const QUERIES: &str = r#"{"query_id":"q1","text":"first question","gold_answers":["a1"]}
{"query_id":"q2","text":"second question","gold_answers":["a2","alt"]}
{"query_id":"q3","text":"third question","gold_answers":["a3"]}
"#;

    const COLLECTION: &str = r#"{"doc_id":"d1","text":"alpha beta","actual_author":"human"}
{"doc_id":"d2","text":"gamma delta","actual_author":"human"}
{"doc_id":"d3","text":"epsilon","actual_author":"human"}
{"doc_id":"d4","text":"zeta","actual_author":"human"}
{"doc_id":"d5","text":"eta theta","actual_author":"human"}
"#;

    const QRELS: &str = "q1 0 d2 1\nq2 0 d2 1\nq3 0 d4 2\n";

    fn toy_benchmark(dir: &Path) -> Benchmark {
        let q = write_file(dir, "queries.jsonl", QUERIES);
        let c = write_file(dir, "collection.jsonl", COLLECTION);
        let r = write_file(dir, "qrels.txt", QRELS);
        load_benchmark(&q, &c, &r).unwrap()
    }

    #[test]
    fn load_preserves_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let bench = toy_benchmark(dir.path());
        assert_eq!(bench.queries.len(), 3);
        assert_eq!(bench.collection.len(), 5);
        assert_eq!(bench.qrels.len(), 3);
    }

    #[test]
    fn dangling_qrels_doc_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let q = write_file(dir.path(), "queries.jsonl", QUERIES);
        let c = write_file(dir.path(), "collection.jsonl", COLLECTION);
        let r = write_file(dir.path(), "qrels.txt", "q1 0 d99 1\n");
        let err = load_benchmark(&q, &c, &r).unwrap_err();
        assert!(err.to_string().contains("d99"), "{err}");
    }

    #[test]
    fn duplicate_doc_id_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let q = write_file(dir.path(), "queries.jsonl", QUERIES);
        let dup = format!("{COLLECTION}{}", r#"{"doc_id":"d1","text":"again","actual_author":"human"}"#);
        let c = write_file(dir.path(), "collection.jsonl", &dup);
        let r = write_file(dir.path(), "qrels.txt", QRELS);
        let err = load_benchmark(&q, &c, &r).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { what: "document", .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let q = write_file(dir.path(), "queries.jsonl", "{\"query_id\":\"q1\",\"text\":\"ok\",\"gold_answers\":[\"a\"]}\nnot json\n");
        let err = load_queries(&q).unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn paraphrase_linkage_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let q = write_file(dir.path(), "queries.jsonl", QUERIES);
        let bad = r#"{"doc_id":"d1","text":"alpha","actual_author":"human"}
{"doc_id":"d1::synthetic","text":"alpha re","actual_author":"human","paraphrase_of":"d1"}
"#;
        let c = write_file(dir.path(), "collection.jsonl", bad);
        let r = write_file(dir.path(), "qrels.txt", "");
        let err = load_benchmark(&q, &c, &r).unwrap_err();
        assert!(err.to_string().contains("paraphrase_of"), "{err}");
    }

    #[test]
    fn round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let bench = toy_benchmark(dir.path());
        let q2 = dir.path().join("q2.jsonl");
        let c2 = dir.path().join("c2.jsonl");
        let r2 = dir.path().join("r2.txt");
        save_benchmark(&bench, &q2, &c2, &r2).unwrap();
        let reloaded = load_benchmark(&q2, &c2, &r2).unwrap();
        assert_eq!(bench, reloaded);
    }

    #[test]
    fn filter_keeps_exactly_single_relevant_contexts() {
        let dir = tempfile::tempdir().unwrap();
        let bench = toy_benchmark(dir.path());
        let mut contexts = BTreeMap::new();
        contexts.insert("q1".into(), vec!["d1".into(), "d2".into()]); // one relevant (d2)
        contexts.insert("q2".into(), vec!["d1".into(), "d3".into()]); // zero relevant
        contexts.insert("q3".into(), vec!["d4".into(), "d2".into()]); // one relevant (d4)
        let kept = filter_single_relevant(&bench, &contexts);
        assert_eq!(kept, vec!["q1".to_string(), "q3".to_string()]);
    }

    #[test]
    fn filter_drops_multi_relevant_contexts() {
        let dir = tempfile::tempdir().unwrap();
        let q = write_file(dir.path(), "queries.jsonl", QUERIES);
        let c = write_file(dir.path(), "collection.jsonl", COLLECTION);
        let r = write_file(dir.path(), "qrels.txt", "q1 0 d2 1\nq1 0 d3 1\n");
        let bench = load_benchmark(&q, &c, &r).unwrap();
        let mut contexts = BTreeMap::new();
        contexts.insert("q1".into(), vec!["d2".into(), "d3".into()]);
        assert!(filter_single_relevant(&bench, &contexts).is_empty());
    }

    #[test]
    fn sampling_is_deterministic_and_exhaustive() {
        let ids: Vec<String> = (0..10).map(|i| format!("q{i}")).collect();
        let a = sample_ids(&ids, 10, 3).unwrap();
        let b = sample_ids(&ids, 10, 3).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, ids);
        // Permuted with overwhelming probability for this seed.
        assert_ne!(a, ids);
    }

    #[test]
    fn sampling_prefix_is_stable() {
        let ids: Vec<String> = (0..50).map(|i| format!("q{i}")).collect();
        let small = sample_ids(&ids, 20, 9).unwrap();
        let large = sample_ids(&ids, 21, 9).unwrap();
        assert_eq!(small[..], large[..20]);
    }

    #[test]
    fn oversampling_reports_both_counts() {
        let ids: Vec<String> = vec!["q1".into()];
        let err = sample_ids(&ids, 2, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('1'), "{msg}");
    }
}
