//! Deterministic gateway stub for tests and dry runs.
//!
//! Responds by prompt shape: paraphrase prompts echo the passage back
//! (identity paraphrase), name-pool prompts return a fixed list of 100
//! distinct names, and anything else gets a canned cited answer.

use crate::error::Result;
use crate::gateway::{Generate, GenerationRequest, RawGeneration, TokenLogprob};

#[derive(Debug, Clone, Default)]
pub struct MockGateway {
    /// Override for name-pool prompts, for exercising short or duplicated
    /// gateway output.
    pub name_response: Option<String>,
}

const FIRST_NAMES: [&str; 10] = [
    "Ada", "Bruno", "Carla", "Dmitri", "Elena", "Farid", "Greta", "Hiro", "Ines", "Jonas",
];
const LAST_NAMES: [&str; 10] = [
    "Almeida", "Bergstrom", "Castillo", "Dubois", "Eriksen", "Fontaine", "Gruber", "Hayashi",
    "Ivanova", "Jansen",
];

fn default_name_list() -> String {
    let mut out = String::new();
    let mut n = 1;
    for first in FIRST_NAMES {
        for last in LAST_NAMES {
            out.push_str(&format!("{n}. {first} {last}\n"));
            n += 1;
        }
    }
    out
}

impl Generate for MockGateway {
    fn generate(&self, req: &GenerationRequest) -> Result<RawGeneration> {
        req.validate()?;
        let text = if let Some(passage) = req.prompt.split("Passage: ").nth(1) {
            passage.trim().to_string()
        } else if req.prompt.contains("(first name, last name) pairs") {
            self.name_response.clone().unwrap_or_else(default_name_list)
        } else {
            "The answer is supported by the provided sources [0].".to_string()
        };
        let tokens = req.want_logprobs.then(|| {
            vec![TokenLogprob {
                token: text.clone(),
                logprob: (0.9f64).ln(),
            }]
        });
        Ok(RawGeneration {
            text,
            tokens,
            model_id: self.model_id().to_string(),
            tag: req.tag.clone(),
            logprobs_missing: false,
        })
    }

    fn model_id(&self) -> &str {
        "mock"
    }
}
