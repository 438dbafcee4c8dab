//! Chat-completion HTTP gateway.
//!
//! Speaks the de-facto chat-completions JSON schema with the `logprobs`
//! option, so hosted endpoints and local inference servers both work. The
//! API key is read from an environment variable; transient failures retry
//! with capped exponential backoff.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Generate, GenerationRequest, RawGeneration, TokenLogprob};

fn default_path() -> String {
    "/v1/chat/completions".into()
}

fn default_api_key_env() -> String {
    "ABEVAL_API_KEY".into()
}

fn default_parallelism() -> usize {
    4
}

fn default_timeout_s() -> u64 {
    60
}

fn default_max_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub model_id: String,
    #[serde(default = "default_path")]
    pub path: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

pub struct HttpGateway {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: usize,
    logprobs: bool,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    model: Option<String>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
    #[serde(default)]
    logprobs: Option<ResponseLogprobs>,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ResponseLogprobs {
    content: Option<Vec<ResponseToken>>,
}

#[derive(Deserialize)]
struct ResponseToken {
    token: String,
    logprob: f64,
}

impl HttpGateway {
    pub fn new(config: HttpConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| Error::Gateway(format!("client construction failed: {e}")))?;
        let api_key = std::env::var(&config.api_key_env).ok();
        Ok(HttpGateway {
            config,
            client,
            api_key,
        })
    }

    fn endpoint(&self) -> String {
        format!(
            "{}{}",
            self.config.base_url.trim_end_matches('/'),
            self.config.path
        )
    }

    fn send_once(&self, req: &GenerationRequest) -> std::result::Result<RawGeneration, Attempt> {
        let body = ChatRequest {
            model: &self.config.model_id,
            messages: [ChatMessage {
                role: "user",
                content: &req.prompt,
            }],
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            logprobs: req.want_logprobs,
        };
        let mut builder = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| Attempt::Transient(format!("{}: {e}", req.tag)))?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(Attempt::Auth(format!("{status} for {}", req.tag)));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Transient(format!("{status} for {}", req.tag)));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(format!("{status} for {}", req.tag)));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| Attempt::Fatal(format!("bad response body for {}: {e}", req.tag)))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Attempt::Fatal(format!("no choices for {}", req.tag)))?;
        let text = choice.message.content.unwrap_or_default();
        let tokens = choice.logprobs.and_then(|lp| lp.content).map(|entries| {
            entries
                .into_iter()
                .map(|t| TokenLogprob {
                    token: t.token,
                    // Endpoints occasionally report tiny positive values.
                    logprob: t.logprob.min(0.0),
                })
                .collect::<Vec<_>>()
        });
        let logprobs_missing = req.want_logprobs && tokens.is_none();
        if logprobs_missing {
            log::warn!(
                "{}: logprobs requested but not returned; confidence disabled for this record",
                req.tag
            );
        }
        Ok(RawGeneration {
            text,
            tokens,
            model_id: parsed.model.unwrap_or_else(|| self.config.model_id.clone()),
            tag: req.tag.clone(),
            logprobs_missing,
        })
    }
}

enum Attempt {
    Transient(String),
    Fatal(String),
    Auth(String),
}

impl Generate for HttpGateway {
    fn generate(&self, req: &GenerationRequest) -> Result<RawGeneration> {
        req.validate()?;
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self
                    .config
                    .backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(4))
                    .min(8_000);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.send_once(req) {
                Ok(generation) => return Ok(generation),
                Err(Attempt::Auth(msg)) => return Err(Error::Auth(msg)),
                Err(Attempt::Fatal(msg)) => return Err(Error::Gateway(msg)),
                Err(Attempt::Transient(msg)) => {
                    log::warn!("transient gateway failure (attempt {}): {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::Gateway(format!(
            "giving up after {attempts} attempts: {last}"
        )))
    }

    fn model_id(&self) -> &str {
        &self.config.model_id
    }
}
