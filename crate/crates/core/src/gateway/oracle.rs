//! Deterministic biased answer generator for metric validation.
//!
//! The oracle cites documents by coin flips whose thresholds shift with the
//! authorship label each document carries: a positive `bias_strength` makes
//! human-labeled documents more likely to be cited and llm-labeled ones
//! less, by `bias_strength * BIAS_DELTA`. Unlabeled (vanilla) contexts get
//! no adjustment, so the oracle at any bias behaves exactly like the
//! unbiased one there.
//!
//! All draws derive from (seed, query_id, position) and never from the
//! labels, so runs over the same queries are draw-matched across conditions:
//! with zero bias, every condition produces identical citations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::{ContextAssembly, LabelClass};
use crate::error::{Error, Result};
use crate::gateway::{RawGeneration, RequestTag, TokenLogprob};
use crate::seeding::derive_rng;

/// Label adjustment unit: cite probabilities move by `bias_strength * 0.2`.
pub const BIAS_DELTA: f64 = 0.2;

/// Ground-truth bias injector configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OraclePolicy {
    /// In [-1, 1]; positive favors citing human-labeled documents.
    pub bias_strength: f64,
    /// Base probability of citing a relevant document.
    pub cite_relevant_base: f64,
    /// Base probability of citing each non-relevant document.
    pub extra_cite_rate: f64,
    /// Generation probability attached to citations of relevant documents.
    pub confidence_relevant: f64,
    /// Generation probability attached to citations of non-relevant documents.
    pub confidence_nonrelevant: f64,
    pub seed: u64,
}

impl Default for OraclePolicy {
    fn default() -> Self {
        OraclePolicy {
            bias_strength: 0.0,
            cite_relevant_base: 0.7,
            extra_cite_rate: 0.15,
            confidence_relevant: 0.95,
            confidence_nonrelevant: 0.85,
            seed: 0,
        }
    }
}

impl OraclePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.bias_strength) {
            return Err(Error::invalid("oracle policy", "bias_strength must be in [-1, 1]"));
        }
        for (name, p) in [
            ("cite_relevant_base", self.cite_relevant_base),
            ("extra_cite_rate", self.extra_cite_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("oracle policy", format!("{name} must be in [0, 1]")));
            }
        }
        for (name, p) in [
            ("confidence_relevant", self.confidence_relevant),
            ("confidence_nonrelevant", self.confidence_nonrelevant),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid("oracle policy", format!("{name} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

const FILLER_LOGPROB: f64 = -0.01;

/// Generate a synthetic cited answer for a labeled (or vanilla) context.
pub fn oracle_generate(
    ctx: &ContextAssembly,
    policy: &OraclePolicy,
    condition: &str,
) -> RawGeneration {
    let mut rng = derive_rng(policy.seed, &format!("oracle/{}", ctx.query_id));
    let mut cited: Vec<usize> = Vec::new();
    for doc in &ctx.docs {
        // One draw per position, consumed unconditionally so that draws stay
        // matched across labelings of the same context.
        let u: f64 = rng.random();
        let base = if ctx.relevant_set.contains(&doc.index) {
            policy.cite_relevant_base
        } else {
            policy.extra_cite_rate
        };
        let shift = match doc.assigned_label.as_ref().map(|l| l.kind.class()) {
            Some(LabelClass::Human) => policy.bias_strength * BIAS_DELTA,
            Some(LabelClass::Llm) => -policy.bias_strength * BIAS_DELTA,
            None => 0.0,
        };
        if u < (base + shift).clamp(0.0, 1.0) {
            cited.push(doc.index);
        }
    }

    let mut tokens: Vec<TokenLogprob> = Vec::with_capacity(2 + 3 * cited.len());
    if cited.is_empty() {
        tokens.push(TokenLogprob {
            token: "None of the provided documents supports an answer.".into(),
            logprob: FILLER_LOGPROB,
        });
    } else {
        tokens.push(TokenLogprob {
            token: "The answer is supported by the provided sources ".into(),
            logprob: FILLER_LOGPROB,
        });
        for &index in &cited {
            let confidence = if ctx.relevant_set.contains(&index) {
                policy.confidence_relevant
            } else {
                policy.confidence_nonrelevant
            };
            tokens.push(TokenLogprob { token: "[".into(), logprob: FILLER_LOGPROB });
            tokens.push(TokenLogprob {
                token: index.to_string(),
                logprob: confidence.ln(),
            });
            tokens.push(TokenLogprob { token: "]".into(), logprob: FILLER_LOGPROB });
        }
        tokens.push(TokenLogprob { token: ".".into(), logprob: FILLER_LOGPROB });
    }
    let text: String = tokens.iter().map(|t| t.token.as_str()).collect();
    RawGeneration {
        text,
        tokens: Some(tokens),
        model_id: "oracle".into(),
        tag: RequestTag::new(ctx.query_id.clone(), condition),
        logprobs_missing: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{assign_labels, ContextDoc, RagCondition};
    use crate::corpus::AuthorKind;
    use crate::scoring::parse_citations;
    use std::collections::BTreeSet;

    fn context(query_id: &str, k: usize, relevant: usize, author: AuthorKind) -> ContextAssembly {
        let docs = (0..k)
            .map(|i| ContextDoc {
                index: i,
                doc_id: format!("d{i}"),
                text: format!("passage {i}"),
                actual_author: author,
                assigned_label: None,
            })
            .collect();
        let relevant_set: BTreeSet<usize> = [relevant].into_iter().collect();
        ContextAssembly::new(query_id, docs, relevant_set).unwrap()
    }

    #[test]
    fn degenerate_policy_cites_exactly_the_relevant_doc() {
        let policy = OraclePolicy {
            cite_relevant_base: 1.0,
            extra_cite_rate: 0.0,
            ..OraclePolicy::default()
        };
        for q in 0..50 {
            let ctx = context(&format!("q{q}"), 10, q % 10, AuthorKind::Human);
            let gen = oracle_generate(&ctx, &policy, "vanilla");
            let cits = parse_citations(&gen.text, 10);
            assert_eq!(cits.cited, vec![q % 10]);
        }
    }

    #[test]
    fn zero_bias_ignores_labels_exactly() {
        let policy = OraclePolicy { bias_strength: 0.0, seed: 5, ..OraclePolicy::default() };
        for q in 0..100 {
            let ctx = context(&format!("q{q}"), 10, 3, AuthorKind::Human);
            let informed = assign_labels(&ctx, &RagCondition::informed(), None, 1).unwrap();
            let cf = assign_labels(&ctx, &RagCondition::cf_informed(), None, 1).unwrap();
            let a = oracle_generate(&informed, &policy, "informed");
            let b = oracle_generate(&cf, &policy, "cf_informed");
            assert_eq!(a.text, b.text);
        }
    }

    #[test]
    fn full_bias_on_vanilla_matches_zero_bias() {
        let biased = OraclePolicy { bias_strength: 1.0, seed: 9, ..OraclePolicy::default() };
        let unbiased = OraclePolicy { bias_strength: 0.0, seed: 9, ..OraclePolicy::default() };
        for q in 0..50 {
            let ctx = context(&format!("q{q}"), 8, 2, AuthorKind::Human);
            let a = oracle_generate(&ctx, &biased, "vanilla");
            let b = oracle_generate(&ctx, &unbiased, "vanilla");
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bias_shifts_relevant_cite_rate_by_two_beta_delta() {
        // Same seeds, relevant doc labeled human vs llm: the empirical cite
        // rate difference approximates 2 * beta * delta = 0.2.
        let policy = OraclePolicy { bias_strength: 0.5, seed: 13, ..OraclePolicy::default() };
        let n = 2000;
        let mut human_cites = 0;
        let mut llm_cites = 0;
        for q in 0..n {
            let human_ctx = context(&format!("q{q}"), 10, 0, AuthorKind::Human);
            let informed = assign_labels(&human_ctx, &RagCondition::informed(), None, 1).unwrap();
            let cf = assign_labels(&human_ctx, &RagCondition::cf_informed(), None, 1).unwrap();
            if parse_citations(&oracle_generate(&informed, &policy, "i").text, 10).distinct.contains(&0) {
                human_cites += 1;
            }
            if parse_citations(&oracle_generate(&cf, &policy, "c").text, 10).distinct.contains(&0) {
                llm_cites += 1;
            }
        }
        let diff = (human_cites as f64 - llm_cites as f64) / n as f64;
        // Monte Carlo tolerance: the flip probability is exactly 0.2 per
        // query, sigma = sqrt(0.2*0.8/n) ~ 0.009.
        assert!((diff - 0.2).abs() < 0.03, "diff = {diff}");
    }

    #[test]
    fn tokens_reconstruct_text_and_probs_are_valid() {
        let policy = OraclePolicy { bias_strength: 0.3, seed: 2, ..OraclePolicy::default() };
        for q in 0..20 {
            let ctx = context(&format!("q{q}"), 6, 1, AuthorKind::Human);
            let informed = assign_labels(&ctx, &RagCondition::informed(), None, 1).unwrap();
            let gen = oracle_generate(&informed, &policy, "informed");
            gen.validate().unwrap();
            for t in gen.tokens.as_ref().unwrap() {
                let p = t.logprob.exp();
                assert!(p > 0.0 && p <= 1.0);
            }
        }
    }

    #[test]
    fn same_seed_same_generation() {
        let policy = OraclePolicy { seed: 77, ..OraclePolicy::default() };
        let ctx = context("q0", 10, 4, AuthorKind::Human);
        assert_eq!(
            oracle_generate(&ctx, &policy, "vanilla"),
            oracle_generate(&ctx, &policy, "vanilla")
        );
    }
}
