use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {kind} {text:?}: {reason}")]
    InvalidName {
        kind: &'static str,
        text: String,
        reason: &'static str,
    },

    #[error("invalid in-context example: {0}")]
    InvalidExample(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("not enough {what}: need {needed}, have {available}")]
    Insufficient {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("every {step} query failed for {entity:?}")]
    AllFailed {
        step: &'static str,
        entity: String,
        #[source]
        last: BackendError,
    },

    #[error("{0}")]
    Degenerate(&'static str),

    #[error("snippet provider: {0}")]
    Provider(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures of a single completion call.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("network failure: {0}")]
    Network(String),

    #[error("rate limited (HTTP {status})")]
    RateLimited { status: u16 },

    #[error("HTTP {status}: {excerpt}")]
    Status { status: u16, excerpt: String },

    #[error("malformed backend response: {reason}; payload starts with {excerpt:?}")]
    Malformed { reason: String, excerpt: String },

    #[error("no fixture registered for prompt (digest {digest})")]
    Unregistered { digest: String },

    #[error("fixture matcher already registered: {0}")]
    DuplicateMatcher(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("missing API key: set {0}")]
    MissingApiKey(&'static str),

    #[error("cache: {0}")]
    Cache(String),
}

impl BackendError {
    /// Whether the retry policy may attempt the call again.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Network(_) | BackendError::RateLimited { .. } => true,
            BackendError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }
}
