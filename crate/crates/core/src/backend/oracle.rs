//! Deterministic oracle backends for offline testing.
//!
//! Oracles ignore the prompt text entirely: they run a fixed forecast rule
//! on the task's reference window and encode the result with the task
//! codec, so the full pipeline can be exercised with zero network access.

use super::{
    request_hash, now_rfc3339, Backend, BackendConfig, BackendError, Completion, TaskMeta,
};
use crate::codec::encode_series;

/// Repeats the last observed reference value across the horizon.
pub struct PersistenceOracle {
    config: BackendConfig,
    id: String,
}

impl PersistenceOracle {
    pub fn new(config: BackendConfig) -> Self {
        Self {
            config,
            id: "persistence-oracle".to_string(),
        }
    }
}

impl Backend for PersistenceOracle {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        prompt: &str,
        meta: &TaskMeta<'_>,
        samples: u32,
    ) -> Result<Vec<Completion>, BackendError> {
        let last = *meta.reference.last().ok_or(BackendError::InvalidConfig(
            "empty reference window".to_string(),
        ))?;
        let forecast = vec![last; meta.horizon];
        synthesize(&forecast, prompt, meta, samples, &self.id, &self.config)
    }
}

/// Repeats the last full seasonal cycle of period `m`.
pub struct SeasonalOracle {
    period: usize,
    config: BackendConfig,
    id: String,
}

impl SeasonalOracle {
    pub fn new(period: usize, config: BackendConfig) -> Result<Self, BackendError> {
        if period == 0 {
            return Err(BackendError::InvalidConfig(
                "seasonal oracle period must be >= 1".to_string(),
            ));
        }
        Ok(Self {
            period,
            config,
            id: format!("seasonal-oracle-m{period}"),
        })
    }
}

impl Backend for SeasonalOracle {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        prompt: &str,
        meta: &TaskMeta<'_>,
        samples: u32,
    ) -> Result<Vec<Completion>, BackendError> {
        let n = meta.reference.len();
        if n < self.period {
            return Err(BackendError::InvalidConfig(format!(
                "reference window ({n} points) shorter than seasonal period {}",
                self.period
            )));
        }
        let cycle = &meta.reference[n - self.period..];
        let forecast: Vec<f64> = (0..meta.horizon).map(|i| cycle[i % self.period]).collect();
        synthesize(&forecast, prompt, meta, samples, &self.id, &self.config)
    }
}

fn synthesize(
    forecast: &[f64],
    prompt: &str,
    meta: &TaskMeta<'_>,
    samples: u32,
    backend_id: &str,
    config: &BackendConfig,
) -> Result<Vec<Completion>, BackendError> {
    let text = encode_series(forecast, meta.codec)?;
    let created_at = now_rfc3339();
    Ok((0..samples)
        .map(|i| Completion {
            text: text.clone(),
            backend_id: backend_id.to_string(),
            request_hash: request_hash(prompt, &config.model_id, config.temperature, i),
            latency_ms: 0,
            token_usage: None,
            created_at: created_at.clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BackendKind;
    use crate::codec::CodecConfig;

    fn meta<'a>(reference: &'a [f64], horizon: usize, codec: &'a CodecConfig) -> TaskMeta<'a> {
        TaskMeta {
            reference,
            horizon,
            codec,
        }
    }

    #[test]
    fn persistence_repeats_last_value() {
        let codec = CodecConfig {
            precision: 1,
            scale: 1.0,
            ..CodecConfig::default()
        };
        let backend = PersistenceOracle::new(BackendConfig::oracle(BackendKind::PersistenceOracle));
        let reference = [40.0, 41.0, 42.0];
        let out = backend
            .complete("ignored", &meta(&reference, 3, &codec), 1)
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "420, 420, 420");
    }

    #[test]
    fn seasonal_repeats_last_cycle() {
        let codec = CodecConfig {
            precision: 0,
            scale: 1.0,
            ..CodecConfig::default()
        };
        let config = BackendConfig::oracle(BackendKind::SeasonalOracle { period: 4 });
        let backend = SeasonalOracle::new(4, config).unwrap();
        let reference = [1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0];
        let out = backend
            .complete("ignored", &meta(&reference, 4, &codec), 1)
            .unwrap();
        assert_eq!(out[0].text, "1, 2, 3, 4");
    }

    #[test]
    fn seasonal_rejects_short_reference() {
        let codec = CodecConfig::default();
        let config = BackendConfig::oracle(BackendKind::SeasonalOracle { period: 4 });
        let backend = SeasonalOracle::new(4, config).unwrap();
        let reference = [1.0, 2.0];
        assert!(backend
            .complete("ignored", &meta(&reference, 4, &codec), 1)
            .is_err());
    }

    #[test]
    fn oracle_is_deterministic_across_calls() {
        let codec = CodecConfig::default();
        let backend = PersistenceOracle::new(BackendConfig::oracle(BackendKind::PersistenceOracle));
        let reference = [7.5, 8.25];
        let a = backend
            .complete("p", &meta(&reference, 5, &codec), 2)
            .unwrap();
        let b = backend
            .complete("p", &meta(&reference, 5, &codec), 2)
            .unwrap();
        assert_eq!(a[0].text, b[0].text);
        assert_eq!(a[0].request_hash, b[0].request_hash);
        assert_ne!(a[0].request_hash, a[1].request_hash);
    }
}
