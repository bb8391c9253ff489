use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CompletionBackend, CompletionRequest, CompletionResponse};
use crate::error::BackendError;

/// One persisted completion, keyed by the request digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_digest: String,
    pub response: CompletionResponse,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

type Slot = Arc<OnceLock<Result<CompletionResponse, BackendError>>>;

/// Cache-first wrapper around another backend.
///
/// Hits never reach the inner backend. Misses are persisted to an
/// append-only JSON-lines file before they are returned, and concurrent
/// identical requests share one inner call.
pub struct CachedBackend<B> {
    inner: B,
    entries: RwLock<HashMap<String, CompletionResponse>>,
    inflight: Mutex<HashMap<String, Slot>>,
    writer: Mutex<Option<(PathBuf, File)>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<B: CompletionBackend> CachedBackend<B> {
    pub fn in_memory(inner: B) -> Self {
        Self {
            inner,
            entries: RwLock::new(HashMap::new()),
            inflight: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    /// Opens (or creates) the cache file at `path` and loads its entries.
    /// A truncated trailing record is skipped.
    pub fn open(inner: B, path: &Path) -> Result<Self, BackendError> {
        let cache = Self::in_memory(inner);
        let io = |e: std::io::Error| BackendError::Cache(format!("{}: {e}", path.display()));
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            let mut entries = cache.entries.write().unwrap();
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(e) => {
                        entries.insert(e.request_digest, e.response);
                    }
                    Err(e) => log::warn!("{}:{}: ignoring bad cache record: {e}", path.display(), i + 1),
                }
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        *cache.writer.lock().unwrap() = Some((path.to_path_buf(), file));
        Ok(cache)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn get(&self, digest: &str) -> Option<CompletionResponse> {
        self.entries.read().unwrap().get(digest).cloned()
    }

    fn persist(&self, digest: &str, response: &CompletionResponse) -> Result<(), BackendError> {
        let mut writer = self.writer.lock().unwrap();
        if let Some((path, file)) = writer.as_mut() {
            let entry = CacheEntry {
                request_digest: digest.to_owned(),
                response: response.clone(),
                timestamp: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let mut line = serde_json::to_vec(&entry).expect("cache entry serializes");
            line.push(b'\n');
            file.write_all(&line)
                .and_then(|_| file.flush())
                .map_err(|e| BackendError::Cache(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    fn fetch(&self, digest: &str, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        if let Some(hit) = self.get(digest) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let response = self.inner.complete(req)?.check_len(req)?;
        self.persist(digest, &response)?;
        self.entries
            .write()
            .unwrap()
            .insert(digest.to_owned(), response.clone());
        Ok(response)
    }
}

impl<B: CompletionBackend> CompletionBackend for CachedBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        req.validate()?;
        let digest = req.digest();
        if let Some(hit) = self.get(&digest) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        let slot: Slot = self
            .inflight
            .lock()
            .unwrap()
            .entry(digest.clone())
            .or_default()
            .clone();
        let result = slot.get_or_init(|| self.fetch(&digest, req)).clone();
        let mut inflight = self.inflight.lock().unwrap();
        if inflight.get(&digest).is_some_and(|s| Arc::ptr_eq(s, &slot)) {
            inflight.remove(&digest);
        }
        result
    }
}
