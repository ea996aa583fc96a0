//! Uniform completion interface over live HTTP chat endpoints, deterministic
//! oracle backends, and record/replay cassettes, with caching, retries, and
//! rate limiting.
//!
//! Backends are `Send + Sync` and `complete` is reentrant, so one backend
//! instance can serve a pool of workers. Oracle and replay backends are
//! bit-deterministic across runs.
//!
//! ## Request hash
//!
//! Every completion carries a `request_hash` that content-addresses it in
//! caches and cassettes. The hash is the lowercase hex SHA-256 of the
//! UTF-8 bytes of:
//!
//! ```text
//! tsfh-v1\n<prompt byte length, decimal>\n<prompt bytes>\n<model_id>\n<temperature, Rust f64 Display>\n<sample index, decimal>
//! ```
//!
//! Cassette records and cache lookups use sample index 0 as the base hash
//! for the whole request; per-sample completions hash with their own index.
//! Hashing the prompt bytes (not the `PromptSpec` that produced them) means any
//! template edit invalidates caches and cassettes.

mod cache;
mod cassette;
mod http;
mod oracle;

pub use cache::CompletionCache;
pub use cassette::{CassetteRecord, RecordingBackend, ReplayBackend};
pub use http::HttpChatBackend;
pub use oracle::{PersistenceOracle, SeasonalOracle};

use crate::codec::{CodecConfig, CodecError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("network error after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("rate limited by provider: {message}")]
    RateLimited { message: String },
    #[error("provider error (status {status}): {message}")]
    Provider { status: u16, message: String },
    #[error("cassette miss for request hash {request_hash}")]
    CassetteMiss { request_hash: String },
    #[error("storage error: {0}")]
    Storage(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl From<std::io::Error> for BackendError {
    fn from(e: std::io::Error) -> Self {
        BackendError::Storage(e.to_string())
    }
}

/// Which backend implementation to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    /// Live chat-completion endpoint. The endpoint URL falls back to the
    /// `TSFH_API_BASE` environment variable and the bearer token is read
    /// from the variable named by `api_key_env` (default `TSFH_API_KEY`).
    HttpChat {
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default)]
        api_key_env: Option<String>,
    },
    /// Repeats the last reference value across the horizon.
    PersistenceOracle,
    /// Repeats the last full seasonal cycle of the given period.
    SeasonalOracle { period: usize },
    /// Replays completions recorded in a cassette; exact-hash match only.
    Replay { cassette: PathBuf },
    /// Delegates to an inner backend and appends every response to a
    /// cassette file.
    Recording {
        inner: Box<BackendKind>,
        cassette: PathBuf,
    },
}

/// Retry policy for live backends: attempt `i` (0-based, after the first
/// failure) sleeps `backoff_ms[min(i, len-1)]` milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: Vec<u64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_ms: vec![500, 2000, 8000],
        }
    }
}

/// Sliding-window request budget for live backends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLimit {
    pub max_requests: u32,
    pub window_ms: u64,
}

/// Full backend configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "default_model_id")]
    pub model_id: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Samples per query, S.
    #[serde(default = "default_samples")]
    pub samples: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub rate_limit: Option<RateLimit>,
    /// Content-addressed completion cache; one file per request hash.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_model_id() -> String {
    "oracle".to_string()
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    2048
}
fn default_samples() -> u32 {
    1
}
fn default_timeout_ms() -> u64 {
    120_000
}

impl BackendConfig {
    pub fn oracle(kind: BackendKind) -> Self {
        Self {
            kind,
            model_id: default_model_id(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            samples: 1,
            timeout_ms: default_timeout_ms(),
            retry: RetryPolicy::default(),
            rate_limit: None,
            cache_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.samples == 0 {
            return Err(BackendError::InvalidConfig("samples must be >= 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(BackendError::InvalidConfig(
                "retry.max_attempts must be >= 1".into(),
            ));
        }
        if let BackendKind::SeasonalOracle { period } = &self.kind {
            if *period == 0 {
                return Err(BackendError::InvalidConfig(
                    "seasonal oracle period must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Token accounting reported by a provider, when available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One raw LLM response with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub backend_id: String,
    pub request_hash: String,
    pub latency_ms: u64,
    pub token_usage: Option<TokenUsage>,
    pub created_at: String,
}

/// Task-side context a backend may need: oracles forecast from the
/// reference window and encode with the task codec.
#[derive(Debug, Clone)]
pub struct TaskMeta<'a> {
    pub reference: &'a [f64],
    pub horizon: usize,
    pub codec: &'a CodecConfig,
}

/// A completion source shareable across worker threads.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    /// Return `samples` completions for one prompt.
    fn complete(
        &self,
        prompt: &str,
        meta: &TaskMeta<'_>,
        samples: u32,
    ) -> Result<Vec<Completion>, BackendError>;
}

/// Stable content hash for one (prompt, model, temperature, sample) tuple.
pub fn request_hash(prompt: &str, model_id: &str, temperature: f64, sample_index: u32) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"tsfh-v1\n");
    hasher.update(prompt.len().to_string().as_bytes());
    hasher.update(b"\n");
    hasher.update(prompt.as_bytes());
    hasher.update(b"\n");
    hasher.update(model_id.as_bytes());
    hasher.update(b"\n");
    hasher.update(temperature.to_string().as_bytes());
    hasher.update(b"\n");
    hasher.update(sample_index.to_string().as_bytes());
    hex::encode(hasher.finalize())
}

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Build the backend described by `config`, applying the cache wrapper
/// when a cache directory is configured.
pub fn build_backend(config: &BackendConfig) -> Result<Box<dyn Backend>, BackendError> {
    config.validate()?;
    let base = build_kind(&config.kind, config)?;
    match &config.cache_dir {
        Some(dir) => Ok(Box::new(cache::CachingBackend::new(base, dir.clone())?)),
        None => Ok(base),
    }
}

fn build_kind(kind: &BackendKind, config: &BackendConfig) -> Result<Box<dyn Backend>, BackendError> {
    match kind {
        BackendKind::PersistenceOracle => Ok(Box::new(PersistenceOracle::new(config.clone()))),
        BackendKind::SeasonalOracle { period } => {
            Ok(Box::new(SeasonalOracle::new(*period, config.clone())?))
        }
        BackendKind::Replay { cassette } => {
            Ok(Box::new(ReplayBackend::load(cassette, config.clone())?))
        }
        BackendKind::Recording { inner, cassette } => {
            let inner = build_kind(inner, config)?;
            Ok(Box::new(RecordingBackend::new(
                inner,
                cassette.clone(),
                config.clone(),
            )?))
        }
        BackendKind::HttpChat {
            endpoint,
            api_key_env,
        } => Ok(Box::new(HttpChatBackend::new(
            endpoint.clone(),
            api_key_env.clone(),
            config.clone(),
        )?)),
    }
}
