//! Synthetic (llm-rewritten) collection construction and the
//! relevance-preservation audit.
//!
//! Every human-written document gets one paraphrased counterpart. Before
//! synthetic documents may feed metric runs, human annotators audit a sample
//! through a CSV worksheet: the relevant passage pair of every run query,
//! and all non-relevant context passages of a sampled query fraction. The
//! audit is human-in-the-loop by design; verdicts come back through a file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::PromptTemplates;
use crate::corpus::{AuthorKind, Benchmark, Document};
use crate::error::{Error, Result};
use crate::gateway::{paraphrase, Generate};
use crate::seeding::derive_rng;

/// Fraction of paraphrase failures tolerated before the build aborts.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Default)]
pub struct SyntheticBuild {
    pub docs: BTreeMap<String, Document>,
    /// (source doc id, failure description) for skipped documents.
    pub skipped: Vec<(String, String)>,
}

/// Paraphrase every document of the collection into its synthetic
/// counterpart. Per-document failures are recorded and skipped; more than
/// [`MAX_FAILURE_RATE`] of them aborts the build.
pub fn build_synthetic_collection(
    bench: &Benchmark,
    gateway: &dyn Generate,
    templates: &PromptTemplates,
    temperature: f64,
) -> Result<SyntheticBuild> {
    if let Some(doc) = bench
        .collection
        .values()
        .find(|d| d.actual_author != AuthorKind::Human)
    {
        return Err(Error::invalid(
            "synthetic build",
            format!("source document {} is already synthetic", doc.doc_id),
        ));
    }
    let mut build = SyntheticBuild::default();
    for doc in bench.collection.values() {
        match paraphrase(gateway, templates, doc, temperature) {
            Ok(synthetic) => {
                build.docs.insert(synthetic.doc_id.clone(), synthetic);
            }
            Err(e) => {
                log::warn!("paraphrase of {} failed: {e}", doc.doc_id);
                build.skipped.push((doc.doc_id.clone(), e.to_string()));
            }
        }
    }
    let failure_rate = build.skipped.len() as f64 / bench.collection.len() as f64;
    if failure_rate > MAX_FAILURE_RATE {
        return Err(Error::Generation(format!(
            "synthetic build failed for {} of {} documents ({:.1}% > {:.0}% tolerated)",
            build.skipped.len(),
            bench.collection.len(),
            100.0 * failure_rate,
            100.0 * MAX_FAILURE_RATE,
        )));
    }
    Ok(build)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedStatus {
    StillRelevant,
    StillNonRelevant,
}

impl ExpectedStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExpectedStatus::StillRelevant => "still_relevant",
            ExpectedStatus::StillNonRelevant => "still_non_relevant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditItem {
    pub item_id: String,
    pub query_id: String,
    pub original_doc_id: String,
    pub synthetic_doc_id: String,
    pub gold_answer: String,
    pub expected_status: ExpectedStatus,
    pub verdict: Option<Verdict>,
}

/// Build the audit worksheet items.
///
/// One `StillRelevant` item covers the relevant passage pair of every query
/// in `contexts`; `StillNonRelevant` items cover every non-relevant context
/// passage of a seeded `fraction` of those queries.
pub fn make_audit_sample(
    bench: &Benchmark,
    contexts: &BTreeMap<String, Vec<String>>,
    synthetic: &BTreeMap<String, Document>,
    fraction: f64,
    seed: u64,
) -> Result<Vec<AuditItem>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("audit", format!("fraction must be in (0, 1], got {fraction}")));
    }
    // Keep benchmark query order for determinism.
    let query_ids: Vec<&str> = bench
        .queries
        .iter()
        .map(|q| q.query_id.as_str())
        .filter(|id| contexts.contains_key(*id))
        .collect();

    // Index once: paraphrase_of -> synthetic doc.
    let by_source: BTreeMap<&str, &Document> = synthetic
        .values()
        .filter_map(|d| d.paraphrase_of.as_deref().map(|src| (src, d)))
        .collect();

    let mut items = Vec::new();
    for qid in &query_ids {
        let query = bench.query(qid).expect("context queries exist");
        let gold = query.gold_answers.join("; ");
        for did in &contexts[*qid] {
            if bench.qrels.is_relevant(qid, did) {
                if let Some(synth) = by_source.get(did.as_str()) {
                    items.push(AuditItem {
                        item_id: format!("{qid}::{did}::relevant"),
                        query_id: (*qid).into(),
                        original_doc_id: did.clone(),
                        synthetic_doc_id: synth.doc_id.clone(),
                        gold_answer: gold.clone(),
                        expected_status: ExpectedStatus::StillRelevant,
                        verdict: None,
                    });
                } else {
                    log::warn!("no synthetic counterpart of relevant doc {did} for {qid}");
                }
            }
        }
    }

    let n_sampled = ((query_ids.len() as f64 * fraction).round() as usize)
        .clamp(1, query_ids.len());
    let mut shuffled: Vec<&str> = query_ids.clone();
    use rand::seq::SliceRandom;
    shuffled.shuffle(&mut derive_rng(seed, "audit_sample"));
    shuffled.truncate(n_sampled);
    // Emit in benchmark order rather than shuffle order.
    let sampled: Vec<&str> = query_ids
        .iter()
        .filter(|id| shuffled.contains(id))
        .copied()
        .collect();

    for qid in sampled {
        let query = bench.query(qid).expect("context queries exist");
        let gold = query.gold_answers.join("; ");
        for did in &contexts[qid] {
            if bench.qrels.is_relevant(qid, did) {
                continue;
            }
            if let Some(synth) = by_source.get(did.as_str()) {
                items.push(AuditItem {
                    item_id: format!("{qid}::{did}::nonrelevant"),
                    query_id: qid.into(),
                    original_doc_id: did.clone(),
                    synthetic_doc_id: synth.doc_id.clone(),
                    gold_answer: gold.clone(),
                    expected_status: ExpectedStatus::StillNonRelevant,
                    verdict: None,
                });
            } else {
                log::warn!("no synthetic counterpart of non-relevant doc {did} for {qid}");
            }
        }
    }
    Ok(items)
}

/// Write the annotator worksheet: one CSV row per audit item with the texts
/// to judge and an empty verdict column.
pub fn write_audit_worksheet(
    items: &[AuditItem],
    bench: &Benchmark,
    synthetic: &BTreeMap<String, Document>,
    path: &Path,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::invalid("audit worksheet", format!("{}: {e}", path.display())))?;
    writer
        .write_record([
            "item_id",
            "query_text",
            "original_text",
            "synthetic_text",
            "gold_answer",
            "expected_status",
            "verdict",
        ])
        .map_err(|e| Error::invalid("audit worksheet", e.to_string()))?;
    for item in items {
        let query_text = bench
            .query(&item.query_id)
            .map(|q| q.text.as_str())
            .unwrap_or_default();
        let original = bench
            .collection
            .get(&item.original_doc_id)
            .map(|d| d.text.as_str())
            .unwrap_or_default();
        let synthetic_text = synthetic
            .get(&item.synthetic_doc_id)
            .map(|d| d.text.as_str())
            .unwrap_or_default();
        let verdict = match item.verdict {
            Some(Verdict::Pass) => "pass",
            Some(Verdict::Fail) => "fail",
            None => "",
        };
        writer
            .write_record([
                item.item_id.as_str(),
                query_text,
                original,
                synthetic_text,
                item.gold_answer.as_str(),
                item.expected_status.as_str(),
                verdict,
            ])
            .map_err(|e| Error::invalid("audit worksheet", e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub n_items: usize,
    pub n_pass: usize,
    /// Overall pass rate in [0, 1].
    pub pass_rate: f64,
    pub pass_rate_relevant: Option<f64>,
    pub pass_rate_nonrelevant: Option<f64>,
}

impl AuditSummary {
    pub fn gate_open(&self, threshold: f64) -> bool {
        self.pass_rate >= threshold
    }
}

/// Read verdicts back from the (filled-in) worksheet CSV and summarize pass
/// rates per expected status. Every item must have a verdict.
pub fn record_audit(items: &[AuditItem], verdicts_path: &Path) -> Result<AuditSummary> {
    if items.is_empty() {
        return Err(Error::invalid(
            "audit",
            "no audit items; run the audit sampling before synthetic runs",
        ));
    }
    let mut reader = csv::Reader::from_path(verdicts_path)
        .map_err(|e| Error::invalid("audit verdicts", format!("{}: {e}", verdicts_path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::invalid("audit verdicts", e.to_string()))?
        .clone();
    let id_col = headers
        .iter()
        .position(|h| h == "item_id")
        .ok_or_else(|| Error::invalid("audit verdicts", "missing item_id column"))?;
    let verdict_col = headers
        .iter()
        .position(|h| h == "verdict")
        .ok_or_else(|| Error::invalid("audit verdicts", "missing verdict column"))?;
    let mut verdicts: BTreeMap<String, Verdict> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::invalid("audit verdicts", e.to_string()))?;
        let id = record.get(id_col).unwrap_or_default();
        let verdict = match record.get(verdict_col).unwrap_or_default().trim().to_lowercase().as_str() {
            "pass" => Verdict::Pass,
            "fail" => Verdict::Fail,
            "" => continue,
            other => {
                return Err(Error::invalid(
                    "audit verdicts",
                    format!("unknown verdict {other:?} for item {id}"),
                ))
            }
        };
        verdicts.insert(id.to_string(), verdict);
    }

    let missing: Vec<&str> = items
        .iter()
        .filter(|i| !verdicts.contains_key(&i.item_id))
        .map(|i| i.item_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(
            "audit verdicts",
            format!("missing verdicts for: {}", missing.join(", ")),
        ));
    }

    let mut pass = 0usize;
    let mut by_status: BTreeMap<ExpectedStatus, (usize, usize)> = BTreeMap::new();
    for item in items {
        let entry = by_status.entry(item.expected_status).or_insert((0, 0));
        entry.1 += 1;
        if verdicts[&item.item_id] == Verdict::Pass {
            entry.0 += 1;
            pass += 1;
        }
    }
    let rate = |status: ExpectedStatus| {
        by_status
            .get(&status)
            .map(|(p, n)| *p as f64 / *n as f64)
    };
    Ok(AuditSummary {
        n_items: items.len(),
        n_pass: pass,
        pass_rate: pass as f64 / items.len() as f64,
        pass_rate_relevant: rate(ExpectedStatus::StillRelevant),
        pass_rate_nonrelevant: rate(ExpectedStatus::StillNonRelevant),
    })
}
