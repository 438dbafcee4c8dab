//! Citation parsing and per-query attribution scores.
//!
//! Answers cite context documents with bracketed indices such as `[0][5]` or
//! `[1, 3]`. Parsing keeps occurrence order, collapses duplicates into a
//! distinct set, and records indices at or beyond `k` separately; those count
//! neither as correct nor as cited. An empty citation set scores precision 0
//! by convention.

use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::RawGeneration;

static CITE_GROUP_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\s*\d+(?:\s*,\s*\d+)*\s*\]").unwrap());
static NUMBER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationSet {
    /// In-range citation indices in order of appearance, duplicates kept.
    pub cited: Vec<usize>,
    /// Distinct in-range indices.
    pub distinct: BTreeSet<usize>,
    /// Indices at or beyond `k`, in order of appearance.
    pub out_of_range: Vec<usize>,
}

/// A bracketed citation occurrence with its byte span in the answer text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationSpan {
    pub index: usize,
    pub range: Range<usize>,
    pub in_range: bool,
}

/// Scan `text` for every bracketed citation number. `[2][5]` and `[1, 3]`
/// both yield two citations. The span covers the numeral only.
pub fn citation_spans(text: &str, k: usize) -> Vec<CitationSpan> {
    let mut spans = Vec::new();
    for group in CITE_GROUP_RE.find_iter(text) {
        for num in NUMBER_RE.find_iter(group.as_str()) {
            let Ok(index) = num.as_str().parse::<usize>() else {
                continue; // absurdly long numeral, not a citation
            };
            spans.push(CitationSpan {
                index,
                range: group.start() + num.start()..group.start() + num.end(),
                in_range: index < k,
            });
        }
    }
    spans
}

/// Extract the citations of an answer against a context of size `k`.
/// Unparseable text yields an empty set; this never fails.
pub fn parse_citations(answer_text: &str, k: usize) -> CitationSet {
    let mut set = CitationSet::default();
    for span in citation_spans(answer_text, k) {
        if span.in_range {
            set.cited.push(span.index);
            set.distinct.insert(span.index);
        } else {
            set.out_of_range.push(span.index);
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributionScore {
    /// Percentage of distinct cited documents that are relevant.
    pub precision: f64,
    /// Percentage of relevant documents that are cited.
    pub recall: f64,
    pub n_cited: usize,
    pub n_cited_relevant: usize,
}

/// Precision and recall of a citation set against the relevant indices of
/// the context, as percentages.
pub fn score_attribution(
    cits: &CitationSet,
    relevant_set: &BTreeSet<usize>,
) -> Result<AttributionScore> {
    if relevant_set.is_empty() {
        return Err(Error::invalid("attribution", "relevant set is empty"));
    }
    let n_cited = cits.distinct.len();
    let n_cited_relevant = cits.distinct.intersection(relevant_set).count();
    let precision = if n_cited == 0 {
        0.0
    } else {
        100.0 * n_cited_relevant as f64 / n_cited as f64
    };
    let recall = 100.0 * n_cited_relevant as f64 / relevant_set.len() as f64;
    Ok(AttributionScore {
        precision,
        recall,
        n_cited,
        n_cited_relevant,
    })
}

/// Normalize an answer for exact-match comparison: lowercase, punctuation to
/// spaces, articles (a/an/the) dropped, whitespace collapsed.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let depunct: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    depunct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact-match answer correctness: 1 iff any normalized gold answer occurs
/// as a substring of the normalized answer. Gold variants that normalize to
/// the empty string are ignored.
pub fn exact_match(answer_text: &str, gold_answers: &[String]) -> u8 {
    let answer = normalize_answer(answer_text);
    for gold in gold_answers {
        let gold = normalize_answer(gold);
        if !gold.is_empty() && answer.contains(&gold) {
            return 1;
        }
    }
    0
}

/// Per-query attribution quality for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query_id: String,
    pub condition: String,
    pub precision: f64,
    pub recall: f64,
    pub em: u8,
    pub n_cited: usize,
    pub n_cited_relevant: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CitationProb {
    pub index: usize,
    /// Generation probability of the citation numeral, in (0, 1].
    pub probability: f64,
    pub is_relevant: bool,
}

/// Generation probabilities for each citation occurrence of one answer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CitationConfidence {
    pub query_id: String,
    pub condition: String,
    pub citations: Vec<CitationProb>,
}

/// Recover the generation probability of every in-range citation occurrence
/// from the token-level logprobs of a generation.
///
/// A citation's probability is the product of the probabilities of the
/// tokens overlapping its numeral span, so multi-token numerals multiply.
/// Citations whose span aligns with no token are skipped with a warning.
pub fn extract_citation_confidence(
    gen: &RawGeneration,
    cits: &CitationSet,
    relevant_set: &BTreeSet<usize>,
) -> Result<CitationConfidence> {
    let Some(tokens) = &gen.tokens else {
        return Err(Error::invalid(
            "citation confidence",
            format!("no token logprobs for {}", gen.tag),
        ));
    };

    // Token byte offsets over the concatenation, which reconstructs the text
    // for well-formed generations.
    let mut offsets = Vec::with_capacity(tokens.len());
    let mut pos = 0;
    for t in tokens {
        offsets.push(pos..pos + t.token.len());
        pos += t.token.len();
    }
    let concat: String = tokens.iter().map(|t| t.token.as_str()).collect();
    if concat != gen.text {
        log::warn!(
            "token concatenation does not reconstruct text for {}; aligning against tokens",
            gen.tag
        );
    }

    let mut out = CitationConfidence {
        query_id: gen.tag.query_id.clone(),
        condition: gen.tag.condition.clone(),
        citations: Vec::new(),
    };
    let mut matched = 0usize;
    for span in citation_spans(&concat, usize::MAX) {
        // Only occurrences the parser kept (in range for the context).
        if !cits.distinct.contains(&span.index) {
            continue;
        }
        matched += 1;
        let mut logprob_sum = 0.0;
        let mut covered = false;
        for (i, range) in offsets.iter().enumerate() {
            if range.start < span.range.end && range.end > span.range.start {
                logprob_sum += tokens[i].logprob;
                covered = true;
            }
        }
        if !covered {
            log::warn!(
                "citation [{}] in {} aligns with no token; skipped",
                span.index,
                gen.tag
            );
            continue;
        }
        out.citations.push(CitationProb {
            index: span.index,
            probability: logprob_sum.exp(),
            is_relevant: relevant_set.contains(&span.index),
        });
    }
    if matched != cits.cited.len() {
        log::warn!(
            "{}: matched {matched} citation spans but parser saw {}",
            gen.tag,
            cits.cited.len()
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{RawGeneration, RequestTag, TokenLogprob};

    fn set(indices: &[usize]) -> BTreeSet<usize> {
        indices.iter().copied().collect()
    }

    #[test]
    fn parses_adjacent_and_repeated_citations() {
        // Shape of the Mistral output: "... [2][5]. ... [5]."
        let text = "Filmed in various locations [2][5]. The mill too [5].";
        let cits = parse_citations(text, 10);
        assert_eq!(cits.cited, vec![2, 5, 5]);
        assert_eq!(cits.distinct, set(&[2, 5]));
        assert!(cits.out_of_range.is_empty());
    }

    #[test]
    fn parses_comma_separated_runs() {
        let cits = parse_citations("see [1, 3] and [4,5]", 10);
        assert_eq!(cits.cited, vec![1, 3, 4, 5]);
    }

    #[test]
    fn citation_free_text_yields_empty_set() {
        let cits = parse_citations("no citations here", 10);
        assert!(cits.cited.is_empty() && cits.distinct.is_empty() && cits.out_of_range.is_empty());
    }

    #[test]
    fn out_of_range_indices_are_recorded_not_cited() {
        let cits = parse_citations("see [12]", 10);
        assert!(cits.distinct.is_empty());
        assert_eq!(cits.out_of_range, vec![12]);
    }

    #[test]
    fn brackets_without_plain_numbers_are_ignored() {
        let cits = parse_citations("empty [] and [a] and [1a]", 10);
        assert!(cits.cited.is_empty());
    }

    #[test]
    fn parse_is_idempotent_on_serialized_output() {
        let cits = parse_citations("mix [0][3] then [3] and [12]", 10);
        let serialized: String = cits
            .cited
            .iter()
            .map(|i| format!("[{i}]"))
            .chain(cits.out_of_range.iter().map(|i| format!("[{i}]")))
            .collect();
        let again = parse_citations(&serialized, 10);
        assert_eq!(cits, again);
    }

    #[test]
    fn precision_recall_hand_counts() {
        let cits = parse_citations("[0][2][5]", 10);
        let s = score_attribution(&cits, &set(&[5])).unwrap();
        assert!((s.precision - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(s.recall, 100.0);
        assert_eq!((s.n_cited, s.n_cited_relevant), (3, 1));

        let exact = score_attribution(&parse_citations("[5]", 10), &set(&[5])).unwrap();
        assert_eq!((exact.precision, exact.recall), (100.0, 100.0));

        let none = score_attribution(&parse_citations("", 10), &set(&[5])).unwrap();
        assert_eq!((none.precision, none.recall), (0.0, 0.0));
    }

    #[test]
    fn empty_relevant_set_is_rejected() {
        let cits = parse_citations("[1]", 10);
        assert!(score_attribution(&cits, &BTreeSet::new()).is_err());
    }

    #[test]
    fn normalization_strips_case_articles_punctuation() {
        assert_eq!(normalize_answer("The Answer, again!"), "answer again");
        assert_eq!(normalize_answer("  a  lot   of SPACE "), "lot of space");
    }

    #[test]
    fn exact_match_on_answer_fixtures() {
        let golds = vec!["New Zealand".to_string()];
        assert_eq!(exact_match("Filmed in New Zealand [5].", &golds), 1);
        let djokovic = vec!["Novak Djokovic".to_string(), "Djokovic".to_string()];
        assert_eq!(exact_match("Stan Wawrinka won the title [2].", &djokovic), 0);
        assert_eq!(exact_match("", &golds), 0);
    }

    fn gen_with_tokens(tokens: &[(&str, f64)]) -> RawGeneration {
        RawGeneration {
            text: tokens.iter().map(|(t, _)| *t).collect(),
            tokens: Some(
                tokens
                    .iter()
                    .map(|(t, lp)| TokenLogprob {
                        token: t.to_string(),
                        logprob: *lp,
                    })
                    .collect(),
            ),
            model_id: "test".into(),
            tag: RequestTag::new("q1", "cond"),
            logprobs_missing: false,
        }
    }

    #[test]
    fn single_token_citation_probability() {
        let gen = gen_with_tokens(&[("answer ", -0.01), ("[", -0.02), ("5", 0.9f64.ln()), ("]", -0.02)]);
        let cits = parse_citations(&gen.text, 10);
        let conf = extract_citation_confidence(&gen, &cits, &set(&[5])).unwrap();
        assert_eq!(conf.citations.len(), 1);
        assert!((conf.citations[0].probability - 0.9).abs() < 1e-12);
        assert!(conf.citations[0].is_relevant);
    }

    #[test]
    fn multi_token_numeral_multiplies() {
        let gen = gen_with_tokens(&[("[", -0.01), ("1", 0.8f64.ln()), ("0", 0.9f64.ln()), ("]", -0.01)]);
        let cits = parse_citations(&gen.text, 11);
        let conf = extract_citation_confidence(&gen, &cits, &set(&[3])).unwrap();
        assert_eq!(conf.citations.len(), 1);
        assert!((conf.citations[0].probability - 0.72).abs() < 1e-12);
        assert!(!conf.citations[0].is_relevant);
    }

    #[test]
    fn missing_tokens_is_an_error() {
        let mut gen = gen_with_tokens(&[("x", -0.1)]);
        gen.tokens = None;
        let cits = parse_citations("[1]", 10);
        assert!(extract_citation_confidence(&gen, &cits, &set(&[1])).is_err());
    }
}
