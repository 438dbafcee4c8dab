//! Authorship labeling of retrieved contexts and prompt rendering.
//!
//! A context starts as the ordered top-k documents for a query with their
//! actual authors and relevance partition. A labeling pass then assigns the
//! display label each document carries in the prompt, according to the RAG
//! condition: no labels (vanilla), actual authors (informed), flipped
//! authors (cf-informed), or a per-partition mix.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{AuthorKind, Query};
use crate::error::{Error, Result};
use crate::gateway::{Generate, GenerationRequest, RequestTag};
use crate::seeding::derive_rng;

pub const HUMAN_LABEL: &str = "[Human]";
pub const LLM_LABEL: &str = "[LLM]";
pub const AI_LABEL: &str = "[AI]";

/// Which side of the human/llm divide a label reads as, for the bias sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelClass {
    Human,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Human,
    Llm,
    Ai,
    NamedPerson,
}

impl LabelKind {
    /// Named persons read as human authorship, `[AI]` as llm authorship.
    pub fn class(self) -> LabelClass {
        match self {
            LabelKind::Human | LabelKind::NamedPerson => LabelClass::Human,
            LabelKind::Llm | LabelKind::Ai => LabelClass::Llm,
        }
    }
}

/// The authorship label a document carries in the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorLabel {
    pub kind: LabelKind,
    pub display: String,
}

impl AuthorLabel {
    pub fn human() -> Self {
        AuthorLabel {
            kind: LabelKind::Human,
            display: HUMAN_LABEL.into(),
        }
    }

    pub fn llm() -> Self {
        AuthorLabel {
            kind: LabelKind::Llm,
            display: LLM_LABEL.into(),
        }
    }

    pub fn ai() -> Self {
        AuthorLabel {
            kind: LabelKind::Ai,
            display: AI_LABEL.into(),
        }
    }

    pub fn named(name: impl Into<String>) -> Result<Self> {
        let display = name.into();
        if display.is_empty() {
            return Err(Error::invalid("author label", "named person needs a non-empty name"));
        }
        Ok(AuthorLabel {
            kind: LabelKind::NamedPerson,
            display,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RagMode {
    Vanilla,
    Informed,
    CfInformed,
    Mixed,
}

impl RagMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RagMode::Vanilla => "vanilla",
            RagMode::Informed => "informed",
            RagMode::CfInformed => "cf_informed",
            RagMode::Mixed => "mixed",
        }
    }
}

/// Labeling rule for one relevance partition of a mixed-mode context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubMode {
    Informed,
    CfInformed,
}

impl SubMode {
    pub fn label_author(self, actual: AuthorKind) -> AuthorKind {
        match self {
            SubMode::Informed => actual,
            SubMode::CfInformed => actual.flipped(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubMode::Informed => "informed",
            SubMode::CfInformed => "cf_informed",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    /// `[Human]` / `[LLM]` tokens.
    #[default]
    Tokens,
    /// Sampled real names for human authorship, `[AI]` for llm authorship.
    ExtendedNames,
}

impl LabelScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelScheme::Tokens => "tokens",
            LabelScheme::ExtendedNames => "extended_names",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagCondition {
    pub mode: RagMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_relevant_mode: Option<SubMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_nonrelevant_mode: Option<SubMode>,
    pub label_scheme: LabelScheme,
}

impl RagCondition {
    pub fn vanilla() -> Self {
        Self::plain(RagMode::Vanilla)
    }

    pub fn informed() -> Self {
        Self::plain(RagMode::Informed)
    }

    pub fn cf_informed() -> Self {
        Self::plain(RagMode::CfInformed)
    }

    fn plain(mode: RagMode) -> Self {
        RagCondition {
            mode,
            mixed_relevant_mode: None,
            mixed_nonrelevant_mode: None,
            label_scheme: LabelScheme::Tokens,
        }
    }

    pub fn mixed(relevant: SubMode, nonrelevant: SubMode) -> Self {
        RagCondition {
            mode: RagMode::Mixed,
            mixed_relevant_mode: Some(relevant),
            mixed_nonrelevant_mode: Some(nonrelevant),
            label_scheme: LabelScheme::Tokens,
        }
    }

    pub fn with_scheme(mut self, scheme: LabelScheme) -> Self {
        self.label_scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mixed = self.mode == RagMode::Mixed;
        if mixed && (self.mixed_relevant_mode.is_none() || self.mixed_nonrelevant_mode.is_none()) {
            return Err(Error::Config(
                "mixed mode requires mixed_relevant_mode and mixed_nonrelevant_mode".into(),
            ));
        }
        if !mixed && (self.mixed_relevant_mode.is_some() || self.mixed_nonrelevant_mode.is_some()) {
            return Err(Error::Config(format!(
                "mixed_* sub-modes are only valid in mixed mode, not {}",
                self.mode.as_str()
            )));
        }
        Ok(())
    }

    /// The labeling rule for a document, by relevance. `None` means no label.
    fn submode_for(&self, relevant: bool) -> Option<SubMode> {
        match self.mode {
            RagMode::Vanilla => None,
            RagMode::Informed => Some(SubMode::Informed),
            RagMode::CfInformed => Some(SubMode::CfInformed),
            RagMode::Mixed => {
                if relevant {
                    self.mixed_relevant_mode
                } else {
                    self.mixed_nonrelevant_mode
                }
            }
        }
    }
}

/// One document slot of an assembled context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDoc {
    pub index: usize,
    pub doc_id: String,
    pub text: String,
    pub actual_author: AuthorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_label: Option<AuthorLabel>,
}

/// The ordered top-k documents for one query with their relevance partition
/// and, after labeling, per-document authorship labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAssembly {
    pub query_id: String,
    pub docs: Vec<ContextDoc>,
    pub relevant_set: BTreeSet<usize>,
    pub nonrelevant_set: BTreeSet<usize>,
}

impl ContextAssembly {
    /// Build an unlabeled context. Indices must already be contiguous from 0
    /// in `docs`; the non-relevant set is the complement of `relevant_set`.
    pub fn new(
        query_id: impl Into<String>,
        docs: Vec<ContextDoc>,
        relevant_set: BTreeSet<usize>,
    ) -> Result<Self> {
        let query_id = query_id.into();
        for (i, doc) in docs.iter().enumerate() {
            if doc.index != i {
                return Err(Error::invalid(
                    "context",
                    format!("doc index {} at position {i} for query {query_id}", doc.index),
                ));
            }
        }
        if let Some(&max) = relevant_set.iter().max() {
            if max >= docs.len() {
                return Err(Error::invalid(
                    "context",
                    format!("relevant index {max} out of bounds for query {query_id}"),
                ));
            }
        }
        let nonrelevant_set = (0..docs.len())
            .filter(|i| !relevant_set.contains(i))
            .collect();
        Ok(ContextAssembly {
            query_id,
            docs,
            relevant_set,
            nonrelevant_set,
        })
    }

    pub fn k(&self) -> usize {
        self.docs.len()
    }
}

/// Assign per-document authorship labels under `cond`. Vanilla clears all
/// labels; extended names sample one person per human-labeled document from
/// `pool`, seeded per query and document.
pub fn assign_labels(
    ctx: &ContextAssembly,
    cond: &RagCondition,
    pool: Option<&NamePool>,
    seed: u64,
) -> Result<ContextAssembly> {
    cond.validate()?;
    if cond.label_scheme == LabelScheme::ExtendedNames
        && cond.mode != RagMode::Vanilla
        && pool.is_none()
    {
        return Err(Error::Config(
            "extended_names labeling requires a name pool".into(),
        ));
    }
    let mut rng = derive_rng(seed, &format!("names/{}", ctx.query_id));
    let mut out = ctx.clone();
    for doc in &mut out.docs {
        let relevant = ctx.relevant_set.contains(&doc.index);
        let Some(submode) = cond.submode_for(relevant) else {
            doc.assigned_label = None;
            continue;
        };
        let label_author = submode.label_author(doc.actual_author);
        doc.assigned_label = Some(match (cond.label_scheme, label_author) {
            (LabelScheme::Tokens, AuthorKind::Human) => AuthorLabel::human(),
            (LabelScheme::Tokens, AuthorKind::Llm) => AuthorLabel::llm(),
            (LabelScheme::ExtendedNames, AuthorKind::Human) => {
                AuthorLabel::named(pool.expect("checked above").sample(&mut rng))?
            }
            (LabelScheme::ExtendedNames, AuthorKind::Llm) => AuthorLabel::ai(),
        });
    }
    Ok(out)
}

/// Prompt templates with `{documents}` and `{question}` placeholders. The
/// defaults are compiled in; files can override them per run.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub vanilla: String,
    pub informed: String,
    pub paraphrase: String,
    pub name_pool: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            vanilla: include_str!("../assets/prompts/vanilla.txt").to_string(),
            informed: include_str!("../assets/prompts/informed.txt").to_string(),
            paraphrase: include_str!("../assets/prompts/paraphrase.txt").to_string(),
            name_pool: include_str!("../assets/prompts/name_pool.txt").to_string(),
        }
    }
}

/// Single-pass placeholder substitution; placeholder-like text inside the
/// substituted values is left alone.
pub fn substitute(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        if let Some(close_rel) = rest[open..].find('}') {
            let key = &rest[open + 1..open + close_rel];
            for (name, value) in values {
                if key == *name {
                    out.push_str(&rest[..open]);
                    out.push_str(value);
                    rest = &rest[open + close_rel + 1..];
                    continue 'outer;
                }
            }
        }
        out.push_str(&rest[..open + 1]);
        rest = &rest[open + 1..];
    }
    out.push_str(rest);
    out
}

/// Render the generation prompt for a labeled context. Vanilla contexts use
/// the unlabeled template; every other mode appends `(written by {label})`
/// to each document line.
pub fn render_prompt(
    ctx: &ContextAssembly,
    cond: &RagCondition,
    query: &Query,
    templates: &PromptTemplates,
) -> Result<String> {
    let mut lines = Vec::with_capacity(ctx.docs.len());
    for doc in &ctx.docs {
        let mut line = format!("Document [{}]({})", doc.index, doc.text);
        match (&doc.assigned_label, cond.mode) {
            (None, RagMode::Vanilla) => {}
            (Some(label), mode) if mode != RagMode::Vanilla => {
                line.push_str(&format!(" (written by {})", label.display));
            }
            (label, mode) => {
                return Err(Error::invalid(
                    "prompt",
                    format!(
                        "labels inconsistent with mode {} for query {} (label present: {})",
                        mode.as_str(),
                        ctx.query_id,
                        label.is_some()
                    ),
                ));
            }
        }
        lines.push(line);
    }
    let documents = lines.join("\n");
    let template = match cond.mode {
        RagMode::Vanilla => &templates.vanilla,
        _ => &templates.informed,
    };
    Ok(substitute(
        template,
        &[("documents", documents.as_str()), ("question", query.text.as_str())],
    ))
}

/// A pool of (first, last) name pairs for the extended label scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamePool {
    names: Vec<(String, String)>,
}

pub const NAME_POOL_SIZE: usize = 100;

impl NamePool {
    pub fn new(names: Vec<(String, String)>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::invalid("name pool", "no names"));
        }
        let mut distinct: Vec<&(String, String)> = names.iter().collect();
        distinct.sort();
        distinct.dedup();
        if distinct.len() != names.len() {
            return Err(Error::invalid("name pool", "duplicate name pairs"));
        }
        Ok(NamePool { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> String {
        let (first, last) = self.names.choose(rng).expect("pool is non-empty");
        format!("{first} {last}")
    }

    /// Load from a CSV file with a `first,last` header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| {
            Error::invalid("name pool", format!("{}: {e}", path.display()))
        })?;
        let mut names = Vec::new();
        for record in reader.deserialize() {
            let (first, last): (String, String) = record.map_err(|e| {
                Error::invalid("name pool", format!("{}: {e}", path.display()))
            })?;
            names.push((first, last));
        }
        NamePool::new(names)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| Error::invalid("name pool", format!("{}: {e}", path.display())))?;
        writer
            .write_record(["first", "last"])
            .map_err(|e| Error::invalid("name pool", e.to_string()))?;
        for (first, last) in &self.names {
            writer
                .write_record([first, last])
                .map_err(|e| Error::invalid("name pool", e.to_string()))?;
        }
        writer
            .flush()
            .map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

static NAME_LINE_RE: LazyLock<regex::Regex> = LazyLock::new(|| {
    regex::Regex::new(r"^\s*(?:\d+[.)]\s*)?\(?\s*([A-Za-z][\w'-]*)\s*,?\s+([A-Za-z][\w'-]*)\s*\)?\s*$")
        .unwrap()
});

fn parse_name_pairs(text: &str) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for line in text.lines() {
        if let Some(caps) = NAME_LINE_RE.captures(line) {
            let pair = (caps[1].to_string(), caps[2].to_string());
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
    }
    pairs
}

/// Ask the gateway for 100 distinct (first, last) pairs. Short or duplicated
/// output is retried once, then fails. A static CSV through
/// [`NamePool::from_csv`] bypasses the gateway entirely.
pub fn generate_name_pool(
    gateway: &dyn Generate,
    seed: u64,
    templates: &PromptTemplates,
) -> Result<NamePool> {
    let mut last_count = 0;
    for attempt in 0..2 {
        let req = GenerationRequest {
            prompt: templates.name_pool.clone(),
            temperature: 1.0,
            max_tokens: 2048,
            want_logprobs: false,
            tag: RequestTag::new("name_pool", format!("seed{seed}/attempt{attempt}")),
        };
        let gen = gateway.generate(&req)?;
        let mut pairs = parse_name_pairs(&gen.text);
        last_count = pairs.len();
        if pairs.len() >= NAME_POOL_SIZE {
            pairs.truncate(NAME_POOL_SIZE);
            return NamePool::new(pairs);
        }
        log::warn!(
            "name pool attempt {attempt} produced {} distinct pairs, need {NAME_POOL_SIZE}",
            pairs.len()
        );
    }
    Err(Error::Gateway(format!(
        "name pool generation produced {last_count} distinct pairs after retry, need {NAME_POOL_SIZE}"
    )))
}
