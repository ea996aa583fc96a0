//! Record/replay cassettes: append-only, newline-delimited JSON records of
//! (prompt, completions) pairs keyed by request hash.
//!
//! Replay requires an exact hash match; there is no fuzzy matching, so a
//! replayed run is reproducible byte for byte. The record's `request_hash`
//! is the base hash (sample index 0); individual completions re-hash with
//! their own sample index when served.

use super::{
    request_hash, now_rfc3339, Backend, BackendConfig, BackendError, Completion, TaskMeta,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// One cassette line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub request_hash: String,
    pub model_id: String,
    pub temperature: f64,
    pub prompt_text: String,
    pub completions: Vec<String>,
    pub recorded_at: String,
}

pub(crate) fn read_cassette(path: &Path) -> Result<Vec<CassetteRecord>, BackendError> {
    let file = std::fs::File::open(path).map_err(|e| {
        BackendError::Storage(format!("open cassette {}: {e}", path.display()))
    })?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CassetteRecord = serde_json::from_str(&line).map_err(|e| {
            BackendError::Storage(format!(
                "cassette {} line {}: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Serves completions recorded in a cassette file.
pub struct ReplayBackend {
    records: HashMap<String, CassetteRecord>,
    config: BackendConfig,
    id: String,
}

impl ReplayBackend {
    pub fn load(path: &Path, config: BackendConfig) -> Result<Self, BackendError> {
        let mut records = HashMap::new();
        for record in read_cassette(path)? {
            // Later lines win so re-recordings shadow older takes.
            records.insert(record.request_hash.clone(), record);
        }
        Ok(Self {
            records,
            id: format!("replay:{}", config.model_id),
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        prompt: &str,
        _meta: &TaskMeta<'_>,
        samples: u32,
    ) -> Result<Vec<Completion>, BackendError> {
        let base = request_hash(prompt, &self.config.model_id, self.config.temperature, 0);
        let record = self
            .records
            .get(&base)
            .ok_or(BackendError::CassetteMiss {
                request_hash: base.clone(),
            })?;
        if (record.completions.len() as u32) < samples {
            return Err(BackendError::CassetteMiss { request_hash: base });
        }
        Ok(record
            .completions
            .iter()
            .take(samples as usize)
            .enumerate()
            .map(|(i, text)| Completion {
                text: text.clone(),
                backend_id: self.id.clone(),
                request_hash: request_hash(
                    prompt,
                    &self.config.model_id,
                    self.config.temperature,
                    i as u32,
                ),
                latency_ms: 0,
                token_usage: None,
                created_at: record.recorded_at.clone(),
            })
            .collect())
    }
}

/// Delegates to an inner backend and appends every response to a cassette.
pub struct RecordingBackend {
    inner: Box<dyn Backend>,
    cassette: PathBuf,
    config: BackendConfig,
    id: String,
    write_lock: Mutex<()>,
}

impl RecordingBackend {
    pub fn new(
        inner: Box<dyn Backend>,
        cassette: PathBuf,
        config: BackendConfig,
    ) -> Result<Self, BackendError> {
        if let Some(parent) = cassette.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let id = format!("recording:{}", inner.id());
        Ok(Self {
            inner,
            cassette,
            config,
            id,
            write_lock: Mutex::new(()),
        })
    }
}

impl Backend for RecordingBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        prompt: &str,
        meta: &TaskMeta<'_>,
        samples: u32,
    ) -> Result<Vec<Completion>, BackendError> {
        let completions = self.inner.complete(prompt, meta, samples)?;
        let record = CassetteRecord {
            request_hash: request_hash(prompt, &self.config.model_id, self.config.temperature, 0),
            model_id: self.config.model_id.clone(),
            temperature: self.config.temperature,
            prompt_text: prompt.to_string(),
            completions: completions.iter().map(|c| c.text.clone()).collect(),
            recorded_at: now_rfc3339(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| BackendError::Storage(format!("serialize cassette record: {e}")))?;
        let _guard = self.write_lock.lock().expect("cassette lock poisoned");
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.cassette)?;
        writeln!(file, "{line}")?;
        Ok(completions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendKind, PersistenceOracle};
    use crate::codec::CodecConfig;

    fn meta<'a>(reference: &'a [f64], codec: &'a CodecConfig) -> TaskMeta<'a> {
        TaskMeta {
            reference,
            horizon: 3,
            codec,
        }
    }

    #[test]
    fn record_then_replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("take.jsonl");
        let config = BackendConfig::oracle(BackendKind::PersistenceOracle);
        let codec = CodecConfig {
            precision: 1,
            scale: 1.0,
            ..CodecConfig::default()
        };
        let reference = [1.0, 2.0, 3.0];

        let oracle = Box::new(PersistenceOracle::new(config.clone()));
        let recording = RecordingBackend::new(oracle, path.clone(), config.clone()).unwrap();
        let live = recording
            .complete("the prompt", &meta(&reference, &codec), 1)
            .unwrap();

        let replay = ReplayBackend::load(&path, config).unwrap();
        assert_eq!(replay.len(), 1);
        let replayed = replay
            .complete("the prompt", &meta(&reference, &codec), 1)
            .unwrap();
        assert_eq!(replayed[0].text, live[0].text);

        // Any altered prompt misses.
        assert!(matches!(
            replay.complete("the prompt!", &meta(&reference, &codec), 1),
            Err(BackendError::CassetteMiss { .. })
        ));
    }

    #[test]
    fn replay_requires_enough_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("take.jsonl");
        let config = BackendConfig::oracle(BackendKind::PersistenceOracle);
        let codec = CodecConfig::default();
        let reference = [5.0];
        let oracle = Box::new(PersistenceOracle::new(config.clone()));
        let recording = RecordingBackend::new(oracle, path.clone(), config.clone()).unwrap();
        recording.complete("p", &meta(&reference, &codec), 1).unwrap();
        let replay = ReplayBackend::load(&path, config).unwrap();
        assert!(replay.complete("p", &meta(&reference, &codec), 2).is_err());
    }
}
