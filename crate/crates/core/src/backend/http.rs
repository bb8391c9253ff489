use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CompletionBackend, CompletionRequest, CompletionResponse, RetryPolicy};
use crate::error::BackendError;

pub const API_KEY_ENV: &str = "KGCRAWL_API_KEY";

const EXCERPT_LEN: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/completions".into(),
            model: "text-davinci-002".into(),
            timeout_secs: 60,
            retry: RetryPolicy::default(),
        }
    }
}

/// Client for an OpenAI-style `/completions` endpoint.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig, api_key: impl Into<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Network(e.to_string()))?;
        Ok(Self {
            config,
            api_key: api_key.into(),
            client,
        })
    }

    /// Reads the bearer token from `KGCRAWL_API_KEY`.
    pub fn from_env(config: HttpConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or(BackendError::MissingApiKey(API_KEY_ENV))?;
        Self::new(config, key)
    }

    pub fn request_body(&self, req: &CompletionRequest) -> Value {
        json!({
            "model": self.config.model,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "n": req.n_samples,
            "max_tokens": req.max_tokens,
            "stop": req.stop_sequences,
        })
    }

    fn send_once(&self, body: &Value, n: u32) -> Result<CompletionResponse, BackendError> {
        let resp = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| BackendError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| BackendError::Network(e.to_string()))?;
        match status {
            200..=299 => parse_completions(&text, n),
            429 => Err(BackendError::RateLimited { status }),
            _ => Err(BackendError::Status {
                status,
                excerpt: excerpt(&text),
            }),
        }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        let body = self.request_body(req);
        self.config
            .retry
            .run(std::thread::sleep, || self.send_once(&body, req.n_samples))
    }
}

fn excerpt(text: &str) -> String {
    text.chars().take(EXCERPT_LEN).collect()
}

/// Extracts `choices[*].text`, ordered by `index` when present.
pub(crate) fn parse_completions(body: &str, n: u32) -> Result<CompletionResponse, BackendError> {
    let malformed = |reason: &str| BackendError::Malformed {
        reason: reason.to_owned(),
        excerpt: excerpt(body),
    };
    let value: Value = serde_json::from_str(body).map_err(|_| malformed("not JSON"))?;
    let choices = value
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing `choices` array"))?;
    let mut texts: Vec<(u64, String)> = Vec::with_capacity(choices.len());
    for (pos, choice) in choices.iter().enumerate() {
        let text = choice
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("choice without `text`"))?;
        let index = choice.get("index").and_then(Value::as_u64).unwrap_or(pos as u64);
        texts.push((index, text.to_owned()));
    }
    texts.sort_by_key(|(i, _)| *i);
    if texts.len() != n as usize {
        return Err(malformed(&format!("expected {n} choices, got {}", texts.len())));
    }
    Ok(CompletionResponse {
        texts: texts.into_iter().map(|(_, t)| t).collect(),
    })
}
