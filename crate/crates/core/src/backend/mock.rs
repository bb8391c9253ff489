use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{CompletionBackend, CompletionRequest, CompletionResponse};
use crate::error::{BackendError, Error, Result};

/// How a fixture selects prompts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "match", content = "pattern", rename_all = "lowercase")]
pub enum Matcher {
    Exact(String),
    Prefix(String),
    Suffix(String),
    Contains(String),
}

impl Matcher {
    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Exact(p) => prompt == p,
            Matcher::Prefix(p) => prompt.starts_with(p.as_str()),
            Matcher::Suffix(p) => prompt.ends_with(p.as_str()),
            Matcher::Contains(p) => prompt.contains(p.as_str()),
        }
    }

    fn pattern(&self) -> &str {
        match self {
            Matcher::Exact(p) | Matcher::Prefix(p) | Matcher::Suffix(p) | Matcher::Contains(p) => p,
        }
    }
}

/// One line of a mock script file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockFixture {
    #[serde(flatten)]
    pub matcher: Matcher,
    pub texts: Vec<String>,
}

/// Replays registered completions. Exact matchers win; otherwise the
/// longest matching pattern wins, ties going to the earliest registration.
#[derive(Debug, Default)]
pub struct MockBackend {
    fixtures: RwLock<Vec<MockFixture>>,
    strict: bool,
    calls: Mutex<Vec<CompletionRequest>>,
}

impl MockBackend {
    /// In strict mode an unmatched prompt is an error; otherwise it yields
    /// empty completions.
    pub fn new(strict: bool) -> Self {
        Self {
            strict,
            ..Self::default()
        }
    }

    pub fn register_fixture(&self, matcher: Matcher, texts: Vec<String>) -> Result<(), BackendError> {
        let mut fixtures = self.fixtures.write().unwrap();
        if fixtures.iter().any(|f| f.matcher == matcher) {
            return Err(BackendError::DuplicateMatcher(format!("{matcher:?}")));
        }
        fixtures.push(MockFixture { matcher, texts });
        Ok(())
    }

    /// Registers a fixture whose completion is `text` for every sample.
    pub fn on(&self, matcher: Matcher, text: impl Into<String>) -> Result<(), BackendError> {
        self.register_fixture(matcher, vec![text.into()])
    }

    pub fn with_fixtures(strict: bool, fixtures: impl IntoIterator<Item = MockFixture>) -> Result<Self, BackendError> {
        let backend = Self::new(strict);
        for f in fixtures {
            backend.register_fixture(f.matcher, f.texts)?;
        }
        Ok(backend)
    }

    /// Every request seen so far, in arrival order.
    pub fn calls(&self) -> Vec<CompletionRequest> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    fn lookup(&self, prompt: &str) -> Option<Vec<String>> {
        let fixtures = self.fixtures.read().unwrap();
        let mut best: Option<(bool, usize, &MockFixture)> = None;
        for f in fixtures.iter().filter(|f| f.matcher.matches(prompt)) {
            let rank = (matches!(f.matcher, Matcher::Exact(_)), f.matcher.pattern().len());
            if best.is_none_or(|(e, l, _)| rank > (e, l)) {
                best = Some((rank.0, rank.1, f));
            }
        }
        best.map(|(_, _, f)| f.texts.clone())
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        self.calls.lock().unwrap().push(req.clone());
        let n = req.n_samples as usize;
        let texts = match self.lookup(&req.prompt) {
            Some(texts) if texts.is_empty() => vec![String::new(); n],
            Some(texts) => texts.iter().cycle().take(n).cloned().collect(),
            None if self.strict => {
                return Err(BackendError::Unregistered {
                    digest: req.digest(),
                })
            }
            None => vec![String::new(); n],
        };
        Ok(CompletionResponse { texts })
    }
}

/// Reads a JSON-lines mock script: `{"match": "suffix", "pattern": "...", "texts": [...]}`.
pub fn load_mock_script(path: &Path) -> Result<Vec<MockFixture>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
