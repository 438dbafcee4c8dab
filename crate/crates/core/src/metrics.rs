//! Counterfactual aggregation: attribution sensitivity (CAS), attribution
//! bias (CAB) with its sign aligner, attribution confidence (AC), citation
//! frequency, and paired significance.
//!
//! CAS is the mean absolute per-query change of a metric between the
//! informed and vanilla conditions. CAB is the omega-signed mean per-query
//! difference between the informed and counterfactually-informed conditions;
//! positive values read as bias towards human authorship. Both pair queries
//! strictly: queries missing from either side are dropped, never imputed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::LabelClass;
use crate::error::{Error, Result};
use crate::scoring::{CitationConfidence, QueryScore};
use crate::stats::{paired_t_test, TTest};

/// All per-query scores and citation confidences of one executed condition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionRun {
    pub condition: String,
    pub scores: BTreeMap<String, QueryScore>,
    pub confidences: BTreeMap<String, CitationConfidence>,
}

impl ConditionRun {
    pub fn new(condition: impl Into<String>) -> Self {
        ConditionRun {
            condition: condition.into(),
            ..ConditionRun::default()
        }
    }

    pub fn insert_score(&mut self, score: QueryScore) -> Result<()> {
        if score.condition != self.condition {
            return Err(Error::invalid(
                "condition run",
                format!(
                    "score for condition {} inserted into run {}",
                    score.condition, self.condition
                ),
            ));
        }
        self.scores.insert(score.query_id.clone(), score);
        Ok(())
    }

    pub fn insert_confidence(&mut self, confidence: CitationConfidence) {
        self.confidences
            .insert(confidence.query_id.clone(), confidence);
    }
}

fn paired_ids(a: &ConditionRun, b: &ConditionRun) -> Result<Vec<String>> {
    let ids: Vec<String> = a
        .scores
        .keys()
        .filter(|id| b.scores.contains_key(*id))
        .cloned()
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyPairing {
            a: a.condition.clone(),
            b: b.condition.clone(),
        });
    }
    Ok(ids)
}

/// Counterfactually-estimated attribution sensitivity between an informed
/// run and its vanilla baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasResult {
    pub precision: f64,
    pub recall: f64,
    pub n_paired: usize,
    pub abs_precision_diffs: Vec<f64>,
    pub abs_recall_diffs: Vec<f64>,
}

pub fn compute_cas(informed: &ConditionRun, vanilla: &ConditionRun) -> Result<CasResult> {
    let ids = paired_ids(informed, vanilla)?;
    let n = ids.len() as f64;
    let mut abs_precision_diffs = Vec::with_capacity(ids.len());
    let mut abs_recall_diffs = Vec::with_capacity(ids.len());
    for id in &ids {
        let a = &informed.scores[id];
        let b = &vanilla.scores[id];
        abs_precision_diffs.push((a.precision - b.precision).abs());
        abs_recall_diffs.push((a.recall - b.recall).abs());
    }
    Ok(CasResult {
        precision: abs_precision_diffs.iter().sum::<f64>() / n,
        recall: abs_recall_diffs.iter().sum::<f64>() / n,
        n_paired: ids.len(),
        abs_precision_diffs,
        abs_recall_diffs,
    })
}

/// First-term labels of a CAB pairing: what the relevant and non-relevant
/// sets read as in the informed (or mixed first) condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaContext {
    pub relevant: LabelClass,
    pub nonrelevant: LabelClass,
}

/// Sign aligner: +1 when the first term labels relevant documents human and
/// non-relevant documents llm, -1 otherwise.
pub fn compute_omega(ctx: OmegaContext) -> i32 {
    if ctx.relevant == LabelClass::Human && ctx.nonrelevant == LabelClass::Llm {
        1
    } else {
        -1
    }
}

/// Counterfactually-estimated attribution bias between paired conditions.
/// Diffs are stored unsigned by omega (first minus second).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CabResult {
    pub precision: f64,
    pub recall: f64,
    pub omega: i32,
    pub n_paired: usize,
    pub precision_diffs: Vec<f64>,
    pub recall_diffs: Vec<f64>,
}

pub fn compute_cab(
    informed: &ConditionRun,
    cf_informed: &ConditionRun,
    omega: i32,
) -> Result<CabResult> {
    if omega != 1 && omega != -1 {
        return Err(Error::invalid("cab", format!("omega must be +1 or -1, got {omega}")));
    }
    let ids = paired_ids(informed, cf_informed)?;
    let n = ids.len() as f64;
    let mut precision_diffs = Vec::with_capacity(ids.len());
    let mut recall_diffs = Vec::with_capacity(ids.len());
    for id in &ids {
        let a = &informed.scores[id];
        let b = &cf_informed.scores[id];
        precision_diffs.push(a.precision - b.precision);
        recall_diffs.push(a.recall - b.recall);
    }
    Ok(CabResult {
        precision: omega as f64 * precision_diffs.iter().sum::<f64>() / n,
        recall: omega as f64 * recall_diffs.iter().sum::<f64>() / n,
        omega,
        n_paired: ids.len(),
        precision_diffs,
        recall_diffs,
    })
}

/// CAB for the mixed RAG mode: `first` labels relevant documents with one
/// sub-mode and non-relevant with the other; `second` is the swapped
/// assignment over the same documents. Same arithmetic as [`compute_cab`].
pub fn compute_mixed_cab(
    first: &ConditionRun,
    second: &ConditionRun,
    omega: i32,
) -> Result<CabResult> {
    compute_cab(first, second, omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcSubset {
    Relevant,
    NonRelevant,
}

/// Attribution confidence: the mean generation probability of citations
/// pointing into the chosen subset, pooled over all queries and citation
/// occurrences. `None` when no citation qualifies.
pub fn compute_ac(run: &ConditionRun, subset: AcSubset) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for confidence in run.confidences.values() {
        for citation in &confidence.citations {
            let wanted = match subset {
                AcSubset::Relevant => citation.is_relevant,
                AcSubset::NonRelevant => !citation.is_relevant,
            };
            if wanted {
                sum += citation.probability;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Mean number of cited documents and cited relevant documents per query.
pub fn citation_frequency(run: &ConditionRun) -> Result<(f64, f64)> {
    if run.scores.is_empty() {
        return Err(Error::invalid("citation frequency", "empty run"));
    }
    let n = run.scores.len() as f64;
    let total: usize = run.scores.values().map(|s| s.n_cited).sum();
    let relevant: usize = run.scores.values().map(|s| s.n_cited_relevant).sum();
    Ok((total as f64 / n, relevant as f64 / n))
}

/// Two-sided paired t-test of per-query values against zero.
pub fn t_test_against_zero(values: &[f64]) -> Result<TTest> {
    let zeros = vec![0.0; values.len()];
    paired_t_test(values, &zeros)
}

/// Per-condition means, restricted to `paired` query ids (pass the run's own
/// ids for unrestricted means).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub n_queries: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_em: f64,
    pub ac_relevant: Option<f64>,
    pub ac_nonrelevant: Option<f64>,
    pub mean_cited: f64,
    pub mean_cited_relevant: f64,
}

pub fn summarize_condition(run: &ConditionRun, paired: &[String]) -> Result<ConditionSummary> {
    let scores: Vec<&QueryScore> = paired
        .iter()
        .filter_map(|id| run.scores.get(id))
        .collect();
    if scores.is_empty() {
        return Err(Error::invalid(
            "condition summary",
            format!("no scores for {} in the paired set", run.condition),
        ));
    }
    let n = scores.len() as f64;
    let restricted = ConditionRun {
        condition: run.condition.clone(),
        scores: scores
            .iter()
            .map(|s| (s.query_id.clone(), (*s).clone()))
            .collect(),
        confidences: paired
            .iter()
            .filter_map(|id| run.confidences.get(id).map(|c| (id.clone(), c.clone())))
            .collect(),
    };
    let (mean_cited, mean_cited_relevant) = citation_frequency(&restricted)?;
    Ok(ConditionSummary {
        condition: run.condition.clone(),
        n_queries: scores.len(),
        mean_precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        mean_recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        mean_em: scores.iter().map(|s| s.em as f64).sum::<f64>() / n,
        ac_relevant: compute_ac(&restricted, AcSubset::Relevant),
        ac_nonrelevant: compute_ac(&restricted, AcSubset::NonRelevant),
        mean_cited,
        mean_cited_relevant,
    })
}

/// Aggregated report: per-condition summaries plus CAS/CAB entries with
/// significance at two-sided p < 0.05.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub n_queries_sampled: usize,
    pub conditions: Vec<ReportCondition>,
    pub cas: Vec<CasEntry>,
    pub cab: Vec<CabEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCondition {
    pub relevant_author: String,
    pub nonrelevant_author: String,
    pub mode: String,
    pub label_scheme: String,
    pub condition: String,
    #[serde(flatten)]
    pub summary: ConditionSummary,
    /// Best in its comparison group with p < 0.05 against every other mode,
    /// on both precision and recall.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasEntry {
    pub relevant_author: String,
    pub nonrelevant_author: String,
    pub informed_condition: String,
    pub vanilla_condition: String,
    pub precision: f64,
    pub recall: f64,
    pub n_paired: usize,
    pub p_precision: f64,
    pub p_recall: f64,
    pub significant_precision: bool,
    pub significant_recall: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CabEntry {
    pub relevant_author: String,
    pub nonrelevant_author: String,
    pub first_condition: String,
    pub second_condition: String,
    pub omega: i32,
    pub precision: f64,
    pub recall: f64,
    pub n_paired: usize,
    pub p_precision: f64,
    pub p_recall: f64,
    pub significant_precision: bool,
    pub significant_recall: bool,
}

pub const SIGNIFICANCE_ALPHA: f64 = 0.05;
