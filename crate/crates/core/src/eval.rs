//! Metrics, sample aggregation, end-to-end task execution, the breath
//! frequency sweep, and the prompt ablation suite.

use crate::backend::{Backend, BackendConfig, BackendError, Completion, TaskMeta};
use crate::codec::{decode_completion, encode_series, CodecConfig, CodecError, DecodeDiagnostics};
use crate::prompts::{
    DatasetContext, PromptError, PromptOptions, PromptSpec, PromptTemplate, Strategy,
};
use crate::series::{
    normalize, partition_horizon, ForecastTask, NormStats, SeriesError,
};
use crate::store::RunStore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: truth {truth} vs forecast {forecast}")]
    LengthMismatch { truth: usize, forecast: usize },
    #[error("all {samples} sample(s) failed to decode")]
    AllSamplesFailed { samples: usize },
    #[error("task has no target window; metrics need held-out truth")]
    MissingTarget,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("storage error: {0}")]
    Storage(String),
}

/// Which metric a dataset reports: raw MAE (Darts/Monash style) or MAE on
/// sequences normalized by the training mean and standard deviation
/// (ETT/ILI/Stock/Weather style).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricProtocol {
    #[default]
    RawMae,
    NormalizedMae,
}

/// Mean absolute error.
pub fn mae(truth: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    if truth.len() != forecast.len() || truth.is_empty() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            forecast: forecast.len(),
        });
    }
    let sum: f64 = truth
        .iter()
        .zip(forecast)
        .map(|(y, f)| (y - f).abs())
        .sum();
    Ok(sum / truth.len() as f64)
}

/// MAE on sequences normalized by the training stats; analytically equal
/// to `mae(truth, forecast) / stats.std`.
pub fn normalized_mae(
    truth: &[f64],
    forecast: &[f64],
    stats: &NormStats,
) -> Result<f64, EvalError> {
    if truth.len() != forecast.len() || truth.is_empty() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            forecast: forecast.len(),
        });
    }
    let t = normalize(truth, stats)?;
    let f = normalize(forecast, stats)?;
    mae(&t, &f)
}

/// How multiple samples collapse into one point forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationPolicy {
    #[default]
    Median,
    Mean,
    First,
}

/// Collapse successfully decoded samples into one forecast.
///
/// Samples that failed to decode are dropped before this call; an empty
/// input means every sample failed.
pub fn aggregate_samples(
    decoded: &[Vec<f64>],
    policy: AggregationPolicy,
) -> Result<Vec<f64>, EvalError> {
    if decoded.is_empty() {
        return Err(EvalError::AllSamplesFailed { samples: 0 });
    }
    let horizon = decoded[0].len();
    for sample in decoded {
        if sample.len() != horizon {
            return Err(EvalError::LengthMismatch {
                truth: horizon,
                forecast: sample.len(),
            });
        }
    }
    match policy {
        AggregationPolicy::First => Ok(decoded[0].clone()),
        AggregationPolicy::Mean => Ok((0..horizon)
            .map(|t| decoded.iter().map(|s| s[t]).sum::<f64>() / decoded.len() as f64)
            .collect()),
        AggregationPolicy::Median => Ok((0..horizon)
            .map(|t| {
                let mut column: Vec<f64> = decoded.iter().map(|s| s[t]).collect();
                column.sort_by(|a, b| a.total_cmp(b));
                let n = column.len();
                if n % 2 == 1 {
                    column[n / 2]
                } else {
                    (column[n / 2 - 1] + column[n / 2]) / 2.0
                }
            })
            .collect()),
    }
}

/// One (dataset, strategy, backend, horizon, k) result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset: String,
    pub strategy: Strategy,
    pub backend_id: String,
    pub model_id: String,
    pub horizon: usize,
    pub breath_k: usize,
    pub forecast: Vec<f64>,
    pub mae: f64,
    pub normalized_mae: Option<f64>,
    pub decode_diagnostics: Vec<DecodeDiagnostics>,
    /// Samples whose completion contained no numeric values at all.
    pub refusals: usize,
    pub prompt_hash: String,
    pub completion_hashes: Vec<String>,
}

impl EvalRecord {
    /// The metric the dataset's protocol reports.
    pub fn primary_metric(&self) -> f64 {
        self.normalized_mae.unwrap_or(self.mae)
    }
}

/// Hex SHA-256 of the prompt bytes.
pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hex::encode(hasher.finalize())
}

/// Shared settings for executing tasks end to end.
#[derive(Debug, Clone)]
pub struct TaskRunner {
    pub template: PromptTemplate,
    pub codec: CodecConfig,
    pub aggregation: AggregationPolicy,
    pub options: PromptOptions,
}

impl Default for TaskRunner {
    fn default() -> Self {
        Self {
            template: PromptTemplate::default(),
            codec: CodecConfig::default(),
            aggregation: AggregationPolicy::default(),
            options: PromptOptions::default(),
        }
    }
}

impl TaskRunner {
    /// Render the prompt for one task without touching any backend.
    ///
    /// The codec scale is fitted on the reference window only, so target
    /// values can never leak into the prompt bytes.
    pub fn render_prompt(
        &self,
        task: &ForecastTask,
        context: &DatasetContext,
        strategy: Strategy,
        breath_k: usize,
    ) -> Result<(crate::prompts::PromptText, CodecConfig), EvalError> {
        let codec = self.codec.with_fitted_scale(task.reference())?;
        let history_text = encode_series(task.reference(), &codec)?;
        let spec = PromptSpec {
            strategy,
            context: context.clone(),
            history_text,
            horizon: task.horizon(),
            partition: partition_horizon(task.horizon(), breath_k),
            breath_k,
            output_separator: codec.value_separator.clone(),
            options: self.options,
        };
        Ok((self.template.render(&spec)?, codec))
    }

    /// Encode, prompt, complete, decode, aggregate, and score one task.
    #[allow(clippy::too_many_arguments)]
    pub fn run_task(
        &self,
        task: &ForecastTask,
        context: &DatasetContext,
        strategy: Strategy,
        breath_k: usize,
        protocol: MetricProtocol,
        backend: &dyn Backend,
        backend_config: &BackendConfig,
        store: Option<&RunStore>,
    ) -> Result<EvalRecord, EvalError> {
        let target = task.target().ok_or(EvalError::MissingTarget)?;
        let (prompt, codec) = self.render_prompt(task, context, strategy, breath_k)?;
        let meta = TaskMeta {
            reference: task.reference(),
            horizon: task.horizon(),
            codec: &codec,
        };
        let completions = backend.complete(&prompt.text, &meta, backend_config.samples)?;
        let (mut decoded, mut diagnostics, mut refusals) =
            decode_all(&completions, &codec, task.horizon());

        let mut used_completions = completions;
        if decoded.is_empty() {
            // Bounded recovery: one retry with an explicit numbers-only nudge.
            let retry_prompt = format!("{}\n\nOutput numbers only.", prompt.text);
            let retry = backend.complete(&retry_prompt, &meta, backend_config.samples)?;
            let (d2, diag2, r2) = decode_all(&retry, &codec, task.horizon());
            if d2.is_empty() {
                return Err(EvalError::AllSamplesFailed {
                    samples: backend_config.samples as usize,
                });
            }
            decoded = d2;
            diagnostics = diag2;
            refusals += r2;
            used_completions = retry;
        }

        let forecast = aggregate_samples(&decoded, self.aggregation)?;
        let raw_mae = mae(target, &forecast)?;
        let nmae = match protocol {
            MetricProtocol::RawMae => None,
            MetricProtocol::NormalizedMae => {
                Some(normalized_mae(target, &forecast, &task.stats())?)
            }
        };
        let p_hash = prompt_hash(&prompt.text);
        if let Some(store) = store {
            store
                .save_prompt(&p_hash, &prompt.text)
                .map_err(|e| EvalError::Storage(e.to_string()))?;
            for completion in &used_completions {
                store
                    .save_completion(completion)
                    .map_err(|e| EvalError::Storage(e.to_string()))?;
            }
        }
        Ok(EvalRecord {
            dataset: context.dataset_name.clone(),
            strategy,
            backend_id: backend.id().to_string(),
            model_id: backend_config.model_id.clone(),
            horizon: task.horizon(),
            breath_k,
            forecast,
            mae: raw_mae,
            normalized_mae: nmae,
            decode_diagnostics: diagnostics,
            refusals,
            prompt_hash: p_hash,
            completion_hashes: used_completions
                .iter()
                .map(|c| c.request_hash.clone())
                .collect(),
        })
    }
}

fn decode_all(
    completions: &[Completion],
    codec: &CodecConfig,
    horizon: usize,
) -> (Vec<Vec<f64>>, Vec<DecodeDiagnostics>, usize) {
    let mut decoded = Vec::new();
    let mut diagnostics = Vec::new();
    let mut refusals = 0;
    for completion in completions {
        match decode_completion(&completion.text, codec, horizon) {
            Ok((values, diag)) => {
                decoded.push(values);
                diagnostics.push(diag);
            }
            Err(CodecError::PartialDecode {
                diagnostics: diag, ..
            }) => {
                // Partial samples are dropped; the diagnostics still count.
                diagnostics.push(diag);
            }
            Err(CodecError::NoValuesFound) => {
                refusals += 1;
                diagnostics.push(DecodeDiagnostics {
                    values_expected: horizon,
                    truncated: true,
                    ..DecodeDiagnostics::default()
                });
            }
            Err(_) => {
                diagnostics.push(DecodeDiagnostics {
                    values_expected: horizon,
                    truncated: true,
                    ..DecodeDiagnostics::default()
                });
            }
        }
    }
    (decoded, diagnostics, refusals)
}

/// A task bundled with its dataset framing and metric protocol.
#[derive(Debug, Clone)]
pub struct EvalTask {
    pub task: ForecastTask,
    pub context: DatasetContext,
    pub protocol: MetricProtocol,
}

/// One row of the breath-frequency sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    /// Mean primary metric over tasks; `None` when every cell failed.
    pub mean_metric: Option<f64>,
    pub cells: usize,
    pub failed_cells: usize,
}

/// Sweep the breath frequency over `ks`. `k = 0` runs the no-breath
/// variant; rows come back ordered by k.
pub fn sweep_k(
    runner: &TaskRunner,
    tasks: &[EvalTask],
    ks: &[usize],
    backend: &dyn Backend,
    backend_config: &BackendConfig,
    store: Option<&RunStore>,
) -> Result<Vec<SweepRow>, EvalError> {
    if ks.is_empty() {
        return Err(EvalError::LengthMismatch {
            truth: 1,
            forecast: 0,
        });
    }
    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        let strategy = if k == 0 {
            Strategy::LongShortNoBreath
        } else {
            Strategy::LongShort
        };
        let mut metrics = Vec::new();
        let mut failed = 0;
        for t in tasks {
            match runner.run_task(
                &t.task,
                &t.context,
                strategy,
                k,
                t.protocol,
                backend,
                backend_config,
                store,
            ) {
                Ok(record) => metrics.push(record.primary_metric()),
                Err(_) => failed += 1,
            }
        }
        let mean = if metrics.is_empty() {
            None
        } else {
            Some(metrics.iter().sum::<f64>() / metrics.len() as f64)
        };
        rows.push(SweepRow {
            k,
            mean_metric: mean,
            cells: tasks.len(),
            failed_cells: failed,
        });
    }
    Ok(rows)
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub strategy: Strategy,
    pub mean_metric: Option<f64>,
    /// Relative change vs the naive base row, in percent; 0 for the base.
    pub delta_vs_base_pct: Option<f64>,
    pub cells: usize,
    pub failed_cells: usize,
}

/// Run all five strategies over a task set and report each against the
/// naive base.
pub fn ablation_suite(
    runner: &TaskRunner,
    tasks: &[EvalTask],
    breath_k: usize,
    backend: &dyn Backend,
    backend_config: &BackendConfig,
    store: Option<&RunStore>,
) -> Result<Vec<AblationRow>, EvalError> {
    let order = [
        Strategy::Naive,
        Strategy::Cot,
        Strategy::LongShortNoDecomp,
        Strategy::LongShortNoBreath,
        Strategy::LongShort,
    ];
    let mut rows = Vec::with_capacity(order.len());
    for strategy in order {
        let k = if strategy.uses_breath() { breath_k } else { 0 };
        let mut metrics = Vec::new();
        let mut failed = 0;
        for t in tasks {
            match runner.run_task(
                &t.task,
                &t.context,
                strategy,
                k,
                t.protocol,
                backend,
                backend_config,
                store,
            ) {
                Ok(record) => metrics.push(record.primary_metric()),
                Err(_) => failed += 1,
            }
        }
        let mean = if metrics.is_empty() {
            None
        } else {
            Some(metrics.iter().sum::<f64>() / metrics.len() as f64)
        };
        rows.push(AblationRow {
            strategy,
            mean_metric: mean,
            delta_vs_base_pct: None,
            cells: tasks.len(),
            failed_cells: failed,
        });
    }
    let base = rows[0].mean_metric;
    for row in &mut rows {
        row.delta_vs_base_pct = match (base, row.mean_metric) {
            (Some(b), Some(m)) if b != 0.0 => Some((m - b) / b * 100.0),
            (Some(b), Some(m)) if b == 0.0 && m == 0.0 => Some(0.0),
            _ => None,
        };
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap(), 1.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn mae_matches_loop_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..50);
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e4..1e4)).collect();
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e4..1e4)).collect();
            let got = mae(&t, &f).unwrap();
            let mut acc = 0.0;
            for i in 0..n {
                let d = t[i] - f[i];
                acc += if d < 0.0 { -d } else { d };
            }
            let expect = acc / n as f64;
            assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn nmae_is_mae_over_std() {
        let stats = NormStats {
            mean: 3.0,
            std: 2.0,
            constant: false,
        };
        let t = [1.0, 2.0, 3.0];
        let f = [2.0, 2.0, 5.0];
        let n = normalized_mae(&t, &f, &stats).unwrap();
        assert!((n - 0.5).abs() < 1e-12);
        assert_eq!(normalized_mae(&t, &t, &stats).unwrap(), 0.0);
    }

    #[test]
    fn mae_translation_invariant() {
        let t = [1.0, 2.0, 3.0];
        let f = [2.5, 1.5, 3.5];
        let shifted_t: Vec<f64> = t.iter().map(|v| v + 10.0).collect();
        let shifted_f: Vec<f64> = f.iter().map(|v| v + 10.0).collect();
        let a = mae(&t, &f).unwrap();
        let b = mae(&shifted_t, &shifted_f).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(mae(&t, &f).unwrap(), mae(&f, &t).unwrap());
    }

    #[test]
    fn aggregation_examples() {
        let single = vec![vec![1.0, 2.0]];
        assert_eq!(
            aggregate_samples(&single, AggregationPolicy::Median).unwrap(),
            vec![1.0, 2.0]
        );
        let three = vec![vec![1.0], vec![3.0], vec![2.0]];
        assert_eq!(
            aggregate_samples(&three, AggregationPolicy::Median).unwrap(),
            vec![2.0]
        );
        // One sample dropped: median of an even pair is their mean.
        let two = vec![vec![1.0], vec![3.0]];
        assert_eq!(
            aggregate_samples(&two, AggregationPolicy::Median).unwrap(),
            vec![2.0]
        );
        assert!(matches!(
            aggregate_samples(&[], AggregationPolicy::Median),
            Err(EvalError::AllSamplesFailed { .. })
        ));
    }

    #[test]
    fn aggregation_identical_samples_fixed_point() {
        let sample = vec![1.5, -2.0, 7.0];
        let stack = vec![sample.clone(); 5];
        for policy in [
            AggregationPolicy::Median,
            AggregationPolicy::Mean,
            AggregationPolicy::First,
        ] {
            assert_eq!(aggregate_samples(&stack, policy).unwrap(), sample);
        }
    }
}
