//! Uniform generation interface: remote chat-completion endpoints with
//! token logprobs, a deterministic mock, and the seeded bias oracle.

mod genlog;
pub mod http;
mod mock;
pub mod oracle;

pub use genlog::GenerationLog;
pub use http::{HttpConfig, HttpGateway};
pub use mock::MockGateway;
pub use oracle::{oracle_generate, OraclePolicy, BIAS_DELTA};

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::context::{substitute, PromptTemplates};
use crate::corpus::{AuthorKind, Document};
use crate::error::{Error, Result};

/// Identity of one generation: which query and which condition produced it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestTag {
    pub query_id: String,
    pub condition: String,
}

impl RequestTag {
    pub fn new(query_id: impl Into<String>, condition: impl Into<String>) -> Self {
        RequestTag {
            query_id: query_id.into(),
            condition: condition.into(),
        }
    }
}

impl fmt::Display for RequestTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.query_id, self.condition)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub want_logprobs: bool,
    pub tag: RequestTag,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::invalid("request", "temperature must be >= 0"));
        }
        if self.max_tokens == 0 {
            return Err(Error::invalid("request", "max_tokens must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

/// One completed generation, with token logprobs when the backend provides
/// them. `logprobs_missing` marks records where logprobs were requested but
/// not returned; confidence metrics are disabled for those.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGeneration {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenLogprob>>,
    pub model_id: String,
    pub tag: RequestTag,
    #[serde(default)]
    pub logprobs_missing: bool,
}

impl RawGeneration {
    pub fn validate(&self) -> Result<()> {
        if let Some(tokens) = &self.tokens {
            let concat: String = tokens.iter().map(|t| t.token.as_str()).collect();
            if concat != self.text {
                return Err(Error::invalid(
                    "generation",
                    format!("token concatenation does not reconstruct text for {}", self.tag),
                ));
            }
            if let Some(bad) = tokens.iter().find(|t| t.logprob > 0.0) {
                return Err(Error::invalid(
                    "generation",
                    format!("positive logprob {} for token {:?}", bad.logprob, bad.token),
                ));
            }
        }
        Ok(())
    }
}

/// A prompt-in, text-out generation backend.
pub trait Generate: Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<RawGeneration>;
    fn model_id(&self) -> &str;
}

/// Run requests through the gateway with bounded parallelism. Results come
/// back in request order regardless of completion order, so downstream
/// persistence is deterministic. Per-request failures are returned, not
/// raised.
pub fn generate_batch(
    gateway: &dyn Generate,
    requests: &[GenerationRequest],
    parallelism: usize,
) -> Vec<Result<RawGeneration>> {
    let parallelism = parallelism.max(1).min(requests.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<RawGeneration>)>();
    std::thread::scope(|scope| {
        for _ in 0..parallelism {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= requests.len() {
                    break;
                }
                let result = gateway.generate(&requests[i]);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut slots: Vec<Option<Result<RawGeneration>>> =
            (0..requests.len()).map(|_| None).collect();
        for (i, result) in rx {
            slots[i] = Some(result);
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                slot.unwrap_or_else(|| {
                    Err(Error::Gateway(format!(
                        "no result for request {} ({})",
                        i, requests[i].tag
                    )))
                })
            })
            .collect()
    })
}

/// Rewrite a human-written document through the gateway, producing its
/// synthetic counterpart (`<doc_id>::synthetic`, llm-authored, linked back
/// via `paraphrase_of`).
pub fn paraphrase(
    gateway: &dyn Generate,
    templates: &PromptTemplates,
    doc: &Document,
    temperature: f64,
) -> Result<Document> {
    if doc.actual_author != AuthorKind::Human {
        return Err(Error::invalid(
            "paraphrase",
            format!("{} is not human-written", doc.doc_id),
        ));
    }
    let req = GenerationRequest {
        prompt: substitute(&templates.paraphrase, &[("passage", doc.text.as_str())]),
        temperature,
        max_tokens: 1024,
        want_logprobs: false,
        tag: RequestTag::new(doc.doc_id.clone(), "paraphrase"),
    };
    let gen = gateway.generate(&req)?;
    let text = gen.text.trim().to_string();
    if text.is_empty() {
        return Err(Error::Gateway(format!(
            "empty paraphrase for document {}",
            doc.doc_id
        )));
    }
    Ok(Document {
        doc_id: format!("{}::synthetic", doc.doc_id),
        text,
        actual_author: AuthorKind::Llm,
        paraphrase_of: Some(doc.doc_id.clone()),
    })
}
