use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use sha2::{Digest, Sha256};
use shelfwise_core::{parse_log, EventLog, IngestError, IngestionConfig, ProductSummary};
use tokio::sync::Semaphore;

/// Entries kept before the result cache is cleared.
const CACHE_LIMIT: usize = 4_096;

/// Read-only data shared by all requests, plus a memo of response bodies.
pub struct SessionState {
    log: Option<EventLog>,
    config: IngestionConfig,
    fingerprint: Option<String>,
    products: Vec<ProductSummary>,
    cache: Mutex<HashMap<String, Bytes>>,
    pub(crate) simulations: Semaphore,
}

pub type SharedState = Arc<SessionState>;

/// Hex SHA-256 of a source file.
pub fn fingerprint_of(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl SessionState {
    /// No log loaded: only `/health` succeeds.
    pub fn empty(config: IngestionConfig) -> Self {
        Self::build(None, config, None)
    }

    /// Parses the file; the fingerprint is the SHA-256 of its bytes.
    pub fn load(path: impl AsRef<Path>, config: IngestionConfig) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path)?;
        let report = parse_log(&bytes[..], &config)?;
        Ok(Self::with_fingerprint(report.log, config, fingerprint_of(&bytes)))
    }

    /// Wraps an already parsed log; fingerprinted by its JSON-lines form.
    pub fn from_log(log: EventLog, config: IngestionConfig) -> Self {
        let mut canonical = Vec::new();
        log.write_jsonl(&mut canonical).expect("writing to memory cannot fail");
        let fingerprint = fingerprint_of(&canonical);
        Self::with_fingerprint(log, config, fingerprint)
    }

    pub fn with_fingerprint(log: EventLog, config: IngestionConfig, fingerprint: String) -> Self {
        Self::build(Some(log), config, Some(fingerprint))
    }

    fn build(log: Option<EventLog>, config: IngestionConfig, fingerprint: Option<String>) -> Self {
        let products = log.as_ref().map(EventLog::list_products).unwrap_or_default();
        let workers = std::thread::available_parallelism().map_or(2, |n| n.get());
        Self { log, config, fingerprint, products, cache: Mutex::default(), simulations: Semaphore::new(workers) }
    }

    pub fn log(&self) -> Option<&EventLog> {
        self.log.as_ref()
    }

    pub fn config(&self) -> &IngestionConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> Option<&str> {
        self.fingerprint.as_deref()
    }

    pub fn products(&self) -> &[ProductSummary] {
        &self.products
    }

    pub(crate) fn cached(&self, key: &str) -> Option<Bytes> {
        self.cache.lock().expect("cache lock").get(key).cloned()
    }

    pub(crate) fn remember(&self, key: String, body: Bytes) {
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, body);
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}
