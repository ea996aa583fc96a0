//! Ingestion of benchmark and concurrent datasets into [`TimeSeries`] and
//! task construction under each evaluation protocol.
//!
//! Two protocols are supported:
//!
//! - `benchmark_split(fraction)`: one task whose target is the whole
//!   ceil(fraction * n) suffix, with the full training prefix as the
//!   reference window;
//! - `fixed_horizons([H...])`: one task per horizon, with every target
//!   timestamp strictly after the configured cutoff date so the test
//!   window post-dates the model's training data.

use crate::eval::MetricProtocol;
use crate::prompts::DatasetContext;
use crate::series::{
    fit_norm_stats, split_last_fraction, ForecastTask, Frequency, SeriesError, TimeSeries,
};
use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Reference windows under the fixed-horizons protocol default to
/// `4 * max(H)` points, capped here to bound prompt length.
pub const MAX_DEFAULT_LOOKBACK: usize = 500;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("missing column '{column}' in {path}")]
    MissingColumn { column: String, path: PathBuf },
    #[error("non-numeric value {value:?} in column '{column}' at row {row}")]
    NonNumericValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("unparsable timestamp {value:?} at row {row}")]
    BadTimestamp { row: usize, value: String },
    #[error("timestamps are not strictly increasing at row {row}")]
    NonMonotoneTimestamps { row: usize },
    #[error("no usable rows after filtering in {path}")]
    EmptyAfterFiltering { path: PathBuf },
    #[error("series '{name}' too short: {reason}")]
    SeriesTooShort { name: String, reason: String },
    #[error("fixed-horizons protocol requires a test_cutoff date")]
    MissingCutoff,
    #[error("fixed-horizons protocol requires timestamps")]
    MissingTimestamps,
    #[error("target timestamp {timestamp} is not after the cutoff {cutoff}")]
    CutoffViolation {
        timestamp: NaiveDateTime,
        cutoff: NaiveDate,
    },
    #[error("series '{name}' not found in bundle manifest {path}")]
    NotInManifest { name: String, path: PathBuf },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Csv,
    BenchmarkBundle,
}

/// Task-construction protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    BenchmarkSplit { fraction: f64 },
    FixedHorizons { horizons: Vec<usize> },
}

/// Declarative description of one dataset source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub source: PathBuf,
    pub format: DatasetFormat,
    pub target_column: String,
    #[serde(default)]
    pub timestamp_column: Option<String>,
    pub frequency: Frequency,
    #[serde(flatten)]
    pub protocol: Protocol,
    /// Required by the fixed-horizons (concurrent) protocol; every target
    /// timestamp must be strictly after this date.
    #[serde(default)]
    pub test_cutoff: Option<NaiveDate>,
    #[serde(default)]
    pub metric: MetricProtocol,
    /// Reference window override; see [`MAX_DEFAULT_LOOKBACK`] for the default.
    #[serde(default)]
    pub lookback: Option<usize>,
    /// Prose used in the prompt context section.
    #[serde(default)]
    pub domain_description: Option<String>,
    #[serde(default)]
    pub upper_time_scale: Option<String>,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        match &self.protocol {
            Protocol::FixedHorizons { horizons } => {
                if horizons.is_empty() {
                    return Err(DatasetError::SeriesTooShort {
                        name: self.name.clone(),
                        reason: "fixed_horizons needs at least one horizon".to_string(),
                    });
                }
                if self.test_cutoff.is_none() {
                    return Err(DatasetError::MissingCutoff);
                }
            }
            Protocol::BenchmarkSplit { fraction } => {
                if !(*fraction > 0.0 && *fraction < 1.0) {
                    return Err(DatasetError::SeriesTooShort {
                        name: self.name.clone(),
                        reason: format!("fraction {fraction} must be in (0, 1)"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Prompt framing for this dataset.
    pub fn context(&self) -> DatasetContext {
        DatasetContext {
            dataset_name: self.name.clone(),
            domain_description: self.domain_description.clone().unwrap_or_else(|| {
                format!("a univariate {} time series", frequency_adjective(self.frequency))
            }),
            frequency: self.frequency,
            upper_time_scale: self
                .upper_time_scale
                .clone()
                .unwrap_or_else(|| default_upper_scale(self.frequency).to_string()),
        }
    }
}

fn frequency_adjective(frequency: Frequency) -> &'static str {
    match frequency {
        Frequency::Minute => "minute-level",
        Frequency::Hour => "hourly",
        Frequency::Day => "daily",
        Frequency::Week => "weekly",
        Frequency::Month => "monthly",
        Frequency::Season => "quarterly",
    }
}

fn default_upper_scale(frequency: Frequency) -> &'static str {
    match frequency {
        Frequency::Minute => "hour",
        Frequency::Hour => "day",
        Frequency::Day => "week",
        Frequency::Week => "month",
        Frequency::Month => "year",
        Frequency::Season => "year",
    }
}

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d", "%m/%d/%Y"];

fn parse_timestamp(value: &str, row: usize) -> Result<NaiveDateTime, DatasetError> {
    let trimmed = value.trim();
    for format in TIMESTAMP_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(trimmed, format) {
            return Ok(dt);
        }
        if let Ok(d) = NaiveDate::parse_from_str(trimmed, format) {
            return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists"));
        }
    }
    Err(DatasetError::BadTimestamp {
        row,
        value: value.to_string(),
    })
}

/// Load one series as described by `spec`.
pub fn load_series(spec: &DatasetSpec) -> Result<TimeSeries, DatasetError> {
    match spec.format {
        DatasetFormat::Csv => load_csv(spec),
        DatasetFormat::BenchmarkBundle => load_bundle(spec),
    }
}

fn load_csv(spec: &DatasetSpec) -> Result<TimeSeries, DatasetError> {
    let io_err = |e: &dyn std::fmt::Display| DatasetError::Io {
        path: spec.source.clone(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(&spec.source).map_err(|e| io_err(&e))?;
    let headers = reader.headers().map_err(|e| io_err(&e))?.clone();
    let target_idx = headers
        .iter()
        .position(|h| h.trim() == spec.target_column)
        .ok_or_else(|| DatasetError::MissingColumn {
            column: spec.target_column.clone(),
            path: spec.source.clone(),
        })?;
    let ts_idx = match &spec.timestamp_column {
        Some(column) => Some(headers.iter().position(|h| h.trim() == column.as_str()).ok_or_else(
            || DatasetError::MissingColumn {
                column: column.clone(),
                path: spec.source.clone(),
            },
        )?),
        None => None,
    };

    let mut values = Vec::new();
    let mut timestamps = ts_idx.map(|_| Vec::new());
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 2; // header is row 1
        let record = row.map_err(|e| io_err(&e))?;
        let raw = record.get(target_idx).unwrap_or("").trim();
        if raw.is_empty() {
            // Blank target cells (trailing rows, missing weeks) are filtered.
            continue;
        }
        let value: f64 = raw.replace(',', "").parse().map_err(|_| {
            DatasetError::NonNumericValue {
                row: row_number,
                column: spec.target_column.clone(),
                value: raw.to_string(),
            }
        })?;
        if let (Some(idx), Some(ts)) = (ts_idx, timestamps.as_mut()) {
            let raw_ts = record.get(idx).unwrap_or("");
            ts.push(parse_timestamp(raw_ts, row_number)?);
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(DatasetError::EmptyAfterFiltering {
            path: spec.source.clone(),
        });
    }
    if let Some(ts) = &timestamps {
        if let Some(pos) = ts.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DatasetError::NonMonotoneTimestamps { row: pos + 3 });
        }
    }
    Ok(TimeSeries::new(
        spec.name.clone(),
        values,
        timestamps,
        spec.frequency,
    )?)
}

/// Bundle manifest entry: one series per file, values one per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleEntry {
    pub name: String,
    pub file: String,
    pub frequency: Frequency,
}

fn load_bundle(spec: &DatasetSpec) -> Result<TimeSeries, DatasetError> {
    let manifest_path = spec.source.join("manifest.json");
    let io_err = |path: &Path, e: &dyn std::fmt::Display| DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let text =
        std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, &e))?;
    let entries: Vec<BundleEntry> =
        serde_json::from_str(&text).map_err(|e| io_err(&manifest_path, &e))?;
    let entry = entries
        .iter()
        .find(|e| e.name == spec.name)
        .ok_or_else(|| DatasetError::NotInManifest {
            name: spec.name.clone(),
            path: manifest_path.clone(),
        })?;
    let series_path = spec.source.join(&entry.file);
    let text = std::fs::read_to_string(&series_path).map_err(|e| io_err(&series_path, &e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| DatasetError::NonNumericValue {
            row: i + 1,
            column: "value".to_string(),
            value: trimmed.to_string(),
        })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(DatasetError::EmptyAfterFiltering { path: series_path });
    }
    Ok(TimeSeries::new(
        entry.name.clone(),
        values,
        None,
        entry.frequency,
    )?)
}

/// Build the forecasting tasks a dataset contributes under its protocol.
pub fn make_tasks(
    series: &TimeSeries,
    spec: &DatasetSpec,
) -> Result<Vec<ForecastTask>, DatasetError> {
    spec.validate()?;
    match &spec.protocol {
        Protocol::BenchmarkSplit { fraction } => {
            let (train, test) = split_last_fraction(series, *fraction)?;
            let stats = fit_norm_stats(train.values())?;
            let task = ForecastTask::new(
                train.values().to_vec(),
                Some(test.values().to_vec()),
                test.len(),
                stats,
            )?;
            Ok(vec![task])
        }
        Protocol::FixedHorizons { horizons } => {
            let cutoff = spec.test_cutoff.ok_or(DatasetError::MissingCutoff)?;
            let timestamps = series
                .timestamps()
                .ok_or(DatasetError::MissingTimestamps)?;
            let cutoff_dt = cutoff.and_hms_opt(23, 59, 59).expect("valid time");
            let start = timestamps
                .iter()
                .position(|t| *t > cutoff_dt)
                .ok_or_else(|| DatasetError::SeriesTooShort {
                    name: series.name().to_string(),
                    reason: format!("no observations after cutoff {cutoff}"),
                })?;
            if start == 0 {
                return Err(DatasetError::SeriesTooShort {
                    name: series.name().to_string(),
                    reason: "no history before the cutoff".to_string(),
                });
            }
            let max_h = *horizons.iter().max().expect("validated non-empty");
            let lookback = spec
                .lookback
                .unwrap_or_else(|| (4 * max_h).min(MAX_DEFAULT_LOOKBACK))
                .min(start)
                .max(1);
            // Stats never see target values.
            let stats = fit_norm_stats(&series.values()[..start])?;
            let mut tasks = Vec::with_capacity(horizons.len());
            for &horizon in horizons {
                if horizon == 0 {
                    return Err(DatasetError::SeriesTooShort {
                        name: series.name().to_string(),
                        reason: "horizon 0".to_string(),
                    });
                }
                if start + horizon > series.len() {
                    return Err(DatasetError::SeriesTooShort {
                        name: series.name().to_string(),
                        reason: format!(
                            "needs {} points after cutoff, have {}",
                            horizon,
                            series.len() - start
                        ),
                    });
                }
                for t in &timestamps[start..start + horizon] {
                    if *t <= cutoff_dt {
                        return Err(DatasetError::CutoffViolation {
                            timestamp: *t,
                            cutoff,
                        });
                    }
                }
                let reference = series.values()[start - lookback..start].to_vec();
                let target = series.values()[start..start + horizon].to_vec();
                tasks.push(ForecastTask::new(reference, Some(target), horizon, stats)?);
            }
            Ok(tasks)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn stock_spec(source: PathBuf) -> DatasetSpec {
        DatasetSpec {
            name: "stock".to_string(),
            source,
            format: DatasetFormat::Csv,
            target_column: "Open".to_string(),
            timestamp_column: Some("Date".to_string()),
            frequency: Frequency::Day,
            protocol: Protocol::FixedHorizons { horizons: vec![2] },
            test_cutoff: Some(NaiveDate::from_ymd_opt(2023, 6, 30).unwrap()),
            metric: MetricProtocol::NormalizedMae,
            lookback: None,
            domain_description: None,
            upper_time_scale: None,
        }
    }

    #[test]
    fn loads_stock_style_csv() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "Date,Open,High,Low,Close,Adj Close,Volume\n\
                   2023-06-28,100.0,101.0,99.0,100.5,100.5,1000\n\
                   2023-06-29,101.0,102.0,100.0,101.5,101.5,1100\n\
                   2023-06-30,102.0,103.0,101.0,102.5,102.5,1200\n\
                   2023-07-03,103.0,104.0,102.0,103.5,103.5,1300\n\
                   2023-07-05,104.0,105.0,103.0,104.5,104.5,1400\n";
        let path = write_csv(dir.path(), "stock.csv", csv);
        let series = load_series(&stock_spec(path)).unwrap();
        assert_eq!(series.len(), 5);
        assert_eq!(series.values()[0], 100.0);
        assert!(series.timestamps().is_some());
    }

    #[test]
    fn missing_column_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(dir.path(), "bad.csv", "Date,Close\n2023-01-01,1.0\n");
        assert!(matches!(
            load_series(&stock_spec(path)),
            Err(DatasetError::MissingColumn { .. })
        ));
    }

    #[test]
    fn shuffled_dates_error() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "Date,Open\n2023-01-02,1.0\n2023-01-01,2.0\n";
        let path = write_csv(dir.path(), "shuffled.csv", csv);
        let mut spec = stock_spec(path);
        spec.target_column = "Open".to_string();
        assert!(matches!(
            load_series(&spec),
            Err(DatasetError::NonMonotoneTimestamps { .. })
        ));
    }

    #[test]
    fn non_numeric_value_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "Date,Open\n2023-01-01,1.0\n2023-01-02,oops\n";
        let path = write_csv(dir.path(), "nn.csv", csv);
        match load_series(&stock_spec(path)) {
            Err(DatasetError::NonNumericValue { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected NonNumericValue, got {other:?}"),
        }
    }

    #[test]
    fn fixed_horizon_tasks_respect_cutoff() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "Date,Open\n\
                   2023-06-27,1.0\n2023-06-28,2.0\n2023-06-29,3.0\n2023-06-30,4.0\n\
                   2023-07-03,5.0\n2023-07-04,6.0\n2023-07-05,7.0\n";
        let path = write_csv(dir.path(), "stock.csv", csv);
        let spec = stock_spec(path);
        let series = load_series(&spec).unwrap();
        let tasks = make_tasks(&series, &spec).unwrap();
        assert_eq!(tasks.len(), 1);
        let task = tasks[0].clone();
        assert_eq!(task.target().unwrap(), &[5.0, 6.0]);
        // Reference is the points immediately preceding the cutoff boundary.
        assert_eq!(task.reference().last(), Some(&4.0));
        // Stats fitted on pre-target values only.
        let pre_target = fit_norm_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(task.stats(), pre_target);
    }

    #[test]
    fn benchmark_split_single_task() {
        let values: Vec<f64> = (0..144).map(|i| i as f64).collect();
        let series = TimeSeries::new("air", values, None, Frequency::Month).unwrap();
        let spec = DatasetSpec {
            name: "air".to_string(),
            source: PathBuf::from("unused"),
            format: DatasetFormat::Csv,
            target_column: "value".to_string(),
            timestamp_column: None,
            frequency: Frequency::Month,
            protocol: Protocol::BenchmarkSplit { fraction: 0.2 },
            test_cutoff: None,
            metric: MetricProtocol::RawMae,
            lookback: None,
            domain_description: None,
            upper_time_scale: None,
        };
        let tasks = make_tasks(&series, &spec).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].horizon(), 29);
        assert_eq!(tasks[0].reference().len(), 115);
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("manifest.json"),
            r#"[{"name": "demo", "file": "demo.txt", "frequency": "month"}]"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("demo.txt"), "1.0\n2.0\n3.0\n").unwrap();
        let spec = DatasetSpec {
            name: "demo".to_string(),
            source: dir.path().to_path_buf(),
            format: DatasetFormat::BenchmarkBundle,
            target_column: "value".to_string(),
            timestamp_column: None,
            frequency: Frequency::Month,
            protocol: Protocol::BenchmarkSplit { fraction: 0.4 },
            test_cutoff: None,
            metric: MetricProtocol::RawMae,
            lookback: None,
            domain_description: None,
            upper_time_scale: None,
        };
        let series = load_series(&spec).unwrap();
        assert_eq!(series.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn leakage_perturbing_targets_leaves_stats_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "Date,Open\n\
                   2023-06-27,1.0\n2023-06-28,2.0\n2023-06-29,3.0\n2023-06-30,4.0\n\
                   2023-07-03,5.0\n2023-07-04,6.0\n2023-07-05,7.0\n";
        let perturbed = csv.replace("5.0\n", "500.0\n").replace("6.0\n", "600.0\n");
        let path_a = write_csv(dir.path(), "a.csv", csv);
        let path_b = write_csv(dir.path(), "b.csv", &perturbed);
        let spec_a = stock_spec(path_a);
        let spec_b = stock_spec(path_b);
        let tasks_a = make_tasks(&load_series(&spec_a).unwrap(), &spec_a).unwrap();
        let tasks_b = make_tasks(&load_series(&spec_b).unwrap(), &spec_b).unwrap();
        assert_eq!(tasks_a[0].stats(), tasks_b[0].stats());
        assert_eq!(tasks_a[0].reference(), tasks_b[0].reference());
        assert_ne!(tasks_a[0].target(), tasks_b[0].target());
    }
}
