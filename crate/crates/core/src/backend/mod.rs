//! Backend-neutral completion contract and its implementations.

mod cache;
mod http;
mod mock;
mod retry;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use crate::error::BackendError;
pub use cache::{CacheEntry, CachedBackend};
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use mock::{load_mock_script, Matcher, MockBackend, MockFixture};
pub use retry::RetryPolicy;

pub const SAMPLING_TEMPERATURE: f64 = 0.8;
pub const SAMPLING_N: u32 = 3;
/// Token budget for relation and object generation.
pub const LIST_MAX_TOKENS: u32 = 256;
/// Token budget for paraphrasing.
pub const PARAPHRASE_MAX_TOKENS: u32 = 64;

/// Prompts are Q/A blocks separated by blank lines; an answer ends at the
/// blank line or at the next question marker.
pub fn default_stop_sequences() -> Vec<String> {
    vec!["\n\n".to_owned(), "Q:".to_owned()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Decoding {
    Greedy,
    Sampling { n: u32, temperature: f64 },
}

impl Decoding {
    pub fn sampling() -> Self {
        Decoding::Sampling {
            n: SAMPLING_N,
            temperature: SAMPLING_TEMPERATURE,
        }
    }

    pub fn n_samples(&self) -> u32 {
        match self {
            Decoding::Greedy => 1,
            Decoding::Sampling { n, .. } => *n,
        }
    }

    pub fn temperature(&self) -> f64 {
        match self {
            Decoding::Greedy => 0.0,
            Decoding::Sampling { temperature, .. } => *temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub n_samples: u32,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, decoding: Decoding, max_tokens: u32) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: decoding.temperature(),
            n_samples: decoding.n_samples(),
            max_tokens,
            stop_sequences: default_stop_sequences(),
        }
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0 && self.n_samples == 1
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.n_samples == 0 {
            return Err(BackendError::InvalidRequest("n_samples must be >= 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// SHA-256 over every request field; identical requests share a digest
    /// across processes.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub texts: Vec<String>,
}

impl CompletionResponse {
    pub(crate) fn check_len(self, req: &CompletionRequest) -> Result<Self, BackendError> {
        if self.texts.len() != req.n_samples as usize {
            return Err(BackendError::Malformed {
                reason: format!(
                    "expected {} completions, got {}",
                    req.n_samples,
                    self.texts.len()
                ),
                excerpt: String::new(),
            });
        }
        Ok(self)
    }
}

/// Anything that can answer a completion request. Implementations must
/// tolerate concurrent calls.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(req)
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Arc<T> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(req)
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Box<T> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoding_modes() {
        let g = CompletionRequest::new("p", Decoding::Greedy, 10);
        assert!(g.is_greedy());
        let s = CompletionRequest::new("p", Decoding::sampling(), 10);
        assert_eq!((s.n_samples, s.temperature), (3, 0.8));
        assert!(!s.is_greedy());
        assert_eq!(s.stop_sequences, vec!["\n\n", "Q:"]);
    }

    #[test]
    fn digest_covers_every_field() {
        let base = CompletionRequest::new("p", Decoding::Greedy, 10);
        let d = base.digest();
        assert_eq!(d, base.clone().digest());
        assert_eq!(d.len(), 64);
        let mut v = base.clone();
        v.temperature = 0.8;
        assert_ne!(v.digest(), d);
        let mut v = base.clone();
        v.stop_sequences.pop();
        assert_ne!(v.digest(), d);
        let mut v = base.clone();
        v.max_tokens = 11;
        assert_ne!(v.digest(), d);
        let mut v = base;
        v.n_samples = 2;
        assert_ne!(v.digest(), d);
    }

    #[test]
    fn invalid_requests() {
        let mut r = CompletionRequest::new("p", Decoding::Greedy, 10);
        r.n_samples = 0;
        assert!(r.validate().is_err());
        r.n_samples = 1;
        r.temperature = f64::NAN;
        assert!(r.validate().is_err());
    }
}
