//! Experiment configuration: one TOML file describing datasets, strategies,
//! backend, codec, and output location. Flags win over config values; the
//! config wins over built-in defaults. Environment variables carry only
//! secrets and data-directory paths.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use tsfh_core::backend::BackendConfig;
use tsfh_core::codec::CodecConfig;
use tsfh_core::datasets::DatasetSpec;
use tsfh_core::eval::AggregationPolicy;
use tsfh_core::prompts::{PromptOptions, Strategy};

/// Configuration problems carry the offending file and field.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "config error in {} (field `{}`): {}",
            self.path.display(),
            self.field,
            self.message
        )
    }
}

impl std::error::Error for ConfigError {}

/// One dataset plus its per-dataset prompting overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEntry {
    #[serde(flatten)]
    pub spec: DatasetSpec,
    /// Breath frequency override; defaults to the upper-time-scale rule.
    #[serde(default)]
    pub breath_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    pub strategies: Vec<Strategy>,
    pub backend: BackendConfig,
    #[serde(default)]
    pub codec: CodecConfig,
    /// Breath frequencies for the sweep subcommand.
    #[serde(default)]
    pub ks: Option<Vec<usize>>,
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub aggregation: AggregationPolicy,
    /// Optional prompt template file overriding the bundled one.
    #[serde(default)]
    pub template: Option<PathBuf>,
    #[serde(default)]
    pub prompt_options: PromptOptions,
}

fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            field: "<file>".to_string(),
            message: e.to_string(),
        })?;
        let config: ExperimentConfig = toml::from_str(&text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            field: e
                .span()
                .map(|s| format!("byte range {s:?}"))
                .unwrap_or_else(|| "<unknown>".to_string()),
            message: e.message().to_string(),
        })?;
        config.validate(path)?;
        Ok(config)
    }

    pub fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let err = |field: &str, message: String| ConfigError {
            path: path.to_path_buf(),
            field: field.to_string(),
            message,
        };
        if self.datasets.is_empty() {
            return Err(err("datasets", "at least one dataset required".into()));
        }
        if self.strategies.is_empty() {
            return Err(err("strategies", "at least one strategy required".into()));
        }
        if self.workers == 0 {
            return Err(err("workers", "must be >= 1".into()));
        }
        for (i, entry) in self.datasets.iter().enumerate() {
            entry
                .spec
                .validate()
                .map_err(|e| err(&format!("datasets[{i}]"), e.to_string()))?;
        }
        self.backend
            .validate()
            .map_err(|e| err("backend", e.to_string()))?;
        self.codec
            .validate()
            .map_err(|e| err("codec", e.to_string()))?;
        if let Some(template) = &self.template {
            if !template.is_file() {
                return Err(err(
                    "template",
                    format!("{} is not a file", template.display()),
                ));
            }
        }
        Ok(())
    }
}
