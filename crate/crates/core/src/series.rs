//! Core series representation, train/test splitting, normalization, and
//! horizon partitioning shared by all other modules.
//!
//! All types here are immutable after construction and all operations are
//! pure functions, so everything is safe to share across worker threads.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from series construction and windowing.
#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series '{name}' is too short: {reason}")]
    SeriesTooShort { name: String, reason: String },
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },
    #[error("timestamps are not strictly increasing at index {index}")]
    NonMonotoneTimestamps { index: usize },
    #[error("timestamp count {timestamps} does not match value count {values}")]
    TimestampLengthMismatch { timestamps: usize, values: usize },
    #[error("invalid normalization stats: std = {std}")]
    InvalidStats { std: f64 },
    #[error("invalid split fraction {fraction}: must be in (0, 1)")]
    InvalidFraction { fraction: f64 },
}

/// Sampling frequency label for a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Minute,
    Hour,
    Day,
    Week,
    Month,
    Season,
}

impl Frequency {
    pub const ALL: [Frequency; 6] = [
        Frequency::Minute,
        Frequency::Hour,
        Frequency::Day,
        Frequency::Week,
        Frequency::Month,
        Frequency::Season,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Frequency::Minute => "minute",
            Frequency::Hour => "hour",
            Frequency::Day => "day",
            Frequency::Week => "week",
            Frequency::Month => "month",
            Frequency::Season => "season",
        }
    }
}

impl std::str::FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "minute" => Ok(Frequency::Minute),
            "hour" => Ok(Frequency::Hour),
            "day" | "daily" => Ok(Frequency::Day),
            "week" | "weekly" => Ok(Frequency::Week),
            "month" | "monthly" => Ok(Frequency::Month),
            "season" | "quarter" => Ok(Frequency::Season),
            other => Err(format!("unknown frequency label '{other}'")),
        }
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named, frequency-labeled sequence of real observations with optional
/// timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    values: Vec<f64>,
    timestamps: Option<Vec<NaiveDateTime>>,
    frequency: Frequency,
}

impl TimeSeries {
    /// Build a series, validating that values are non-empty and finite and
    /// that timestamps (when present) align and strictly increase.
    pub fn new(
        name: impl Into<String>,
        values: Vec<f64>,
        timestamps: Option<Vec<NaiveDateTime>>,
        frequency: Frequency,
    ) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::EmptyInput);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFiniteValue { index });
        }
        if let Some(ts) = &timestamps {
            if ts.len() != values.len() {
                return Err(SeriesError::TimestampLengthMismatch {
                    timestamps: ts.len(),
                    values: values.len(),
                });
            }
            for (index, pair) in ts.windows(2).enumerate() {
                if pair[1] <= pair[0] {
                    return Err(SeriesError::NonMonotoneTimestamps { index: index + 1 });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            values,
            timestamps,
            frequency,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[NaiveDateTime]> {
        self.timestamps.as_deref()
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series over `range`, keeping name and frequency.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, SeriesError> {
        if range.start >= range.end || range.end > self.values.len() {
            return Err(SeriesError::SeriesTooShort {
                name: self.name.clone(),
                reason: format!(
                    "slice {}..{} out of bounds for length {}",
                    range.start,
                    range.end,
                    self.values.len()
                ),
            });
        }
        Ok(Self {
            name: self.name.clone(),
            values: self.values[range.clone()].to_vec(),
            timestamps: self.timestamps.as_ref().map(|ts| ts[range].to_vec()),
            frequency: self.frequency,
        })
    }
}

/// Mean and population standard deviation of a training window.
///
/// A constant training series gets `constant = true` and normalization
/// falls back to an effective std of 1, which keeps the transform
/// invertible without dividing by zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
    pub constant: bool,
}

impl NormStats {
    fn effective_std(&self) -> f64 {
        if self.constant {
            1.0
        } else {
            self.std
        }
    }
}

/// One zero-shot forecasting instance: a reference window of length L,
/// an optional held-out target of length H, and normalization stats
/// fitted on the pre-target portion of the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTask {
    reference: Vec<f64>,
    target: Option<Vec<f64>>,
    lookback: usize,
    horizon: usize,
    stats: NormStats,
}

impl ForecastTask {
    pub fn new(
        reference: Vec<f64>,
        target: Option<Vec<f64>>,
        horizon: usize,
        stats: NormStats,
    ) -> Result<Self, SeriesError> {
        if reference.is_empty() || horizon == 0 {
            return Err(SeriesError::EmptyInput);
        }
        if let Some(index) = reference.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFiniteValue { index });
        }
        if let Some(t) = &target {
            if t.len() != horizon {
                return Err(SeriesError::SeriesTooShort {
                    name: "target".into(),
                    reason: format!("target length {} != horizon {}", t.len(), horizon),
                });
            }
            if let Some(index) = t.iter().position(|v| !v.is_finite()) {
                return Err(SeriesError::NonFiniteValue { index });
            }
        }
        let lookback = reference.len();
        Ok(Self {
            reference,
            target,
            lookback,
            horizon,
            stats,
        })
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn stats(&self) -> NormStats {
        self.stats
    }
}

/// Split of the forecast horizon into a short-term head and long-term tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonPartition {
    pub short_steps: usize,
    pub long_steps: usize,
}

impl HorizonPartition {
    pub fn horizon(&self) -> usize {
        self.short_steps + self.long_steps
    }
}

/// Split a series so the test suffix holds `ceil(fraction * len)` points.
pub fn split_last_fraction(
    series: &TimeSeries,
    fraction: f64,
) -> Result<(TimeSeries, TimeSeries), SeriesError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SeriesError::InvalidFraction { fraction });
    }
    let n = series.len();
    let test_len = (fraction * n as f64).ceil() as usize;
    if test_len == 0 || test_len >= n {
        return Err(SeriesError::SeriesTooShort {
            name: series.name().to_string(),
            reason: format!("length {n} with fraction {fraction} leaves an empty split"),
        });
    }
    let train = series.slice(0..n - test_len)?;
    let test = series.slice(n - test_len..n)?;
    Ok((train, test))
}

/// Mean and population standard deviation of the training values.
pub fn fit_norm_stats(train_values: &[f64]) -> Result<NormStats, SeriesError> {
    if train_values.is_empty() {
        return Err(SeriesError::EmptyInput);
    }
    if let Some(index) = train_values.iter().position(|v| !v.is_finite()) {
        return Err(SeriesError::NonFiniteValue { index });
    }
    let n = train_values.len() as f64;
    let mean = train_values.iter().sum::<f64>() / n;
    let variance = train_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = variance.sqrt();
    Ok(NormStats {
        mean,
        std,
        constant: std == 0.0,
    })
}

/// `(v - mean) / std` elementwise; constant-series stats map to `v - mean`.
pub fn normalize(values: &[f64], stats: &NormStats) -> Result<Vec<f64>, SeriesError> {
    if !stats.constant && stats.std <= 0.0 {
        return Err(SeriesError::InvalidStats { std: stats.std });
    }
    let std = stats.effective_std();
    Ok(values.iter().map(|v| (v - stats.mean) / std).collect())
}

/// Exact inverse of [`normalize`].
pub fn denormalize(values: &[f64], stats: &NormStats) -> Result<Vec<f64>, SeriesError> {
    if !stats.constant && stats.std <= 0.0 {
        return Err(SeriesError::InvalidStats { std: stats.std });
    }
    let std = stats.effective_std();
    Ok(values.iter().map(|v| v * std + stats.mean).collect())
}

/// Default short/long split of a horizon.
///
/// With a positive breath frequency `k` the short head is
/// `min(H, max(k, ceil(H/4)))`; with `k = 0` it is `ceil(H/4)`. The split
/// is a prompt hint only and can be overridden in config.
pub fn partition_horizon(horizon: usize, k: usize) -> HorizonPartition {
    debug_assert!(horizon >= 1);
    let quarter = horizon.div_ceil(4);
    let short = if k > 0 {
        horizon.min(quarter.max(k))
    } else {
        quarter.min(horizon)
    };
    HorizonPartition {
        short_steps: short,
        long_steps: horizon - short,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn dt(y: i32, m: u32, d: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    fn series(n: usize) -> TimeSeries {
        TimeSeries::new("t", (0..n).map(|i| i as f64).collect(), None, Frequency::Month).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            TimeSeries::new("x", vec![], None, Frequency::Day),
            Err(SeriesError::EmptyInput)
        ));
        assert!(matches!(
            TimeSeries::new("x", vec![1.0, f64::NAN], None, Frequency::Day),
            Err(SeriesError::NonFiniteValue { index: 1 })
        ));
    }

    #[test]
    fn rejects_non_monotone_timestamps() {
        let ts = vec![dt(2023, 1, 2), dt(2023, 1, 1)];
        assert!(matches!(
            TimeSeries::new("x", vec![1.0, 2.0], Some(ts), Frequency::Day),
            Err(SeriesError::NonMonotoneTimestamps { index: 1 })
        ));
    }

    #[test]
    fn split_len_10_fraction_02() {
        let (train, test) = split_last_fraction(&series(10), 0.2).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn split_matches_standard_horizons() {
        // 144-point monthly and 168-point monthly series under a last-20% split.
        let (_, test) = split_last_fraction(&series(144), 0.2).unwrap();
        assert_eq!(test.len(), 29);
        let (_, test) = split_last_fraction(&series(168), 0.2).unwrap();
        assert_eq!(test.len(), 34);
    }

    #[test]
    fn split_too_short_errors() {
        let s = series(1);
        assert!(split_last_fraction(&s, 0.2).is_err());
    }

    #[test]
    fn norm_stats_closed_form() {
        let stats = fit_norm_stats(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(stats.mean, 2.0);
        assert!((stats.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(!stats.constant);
    }

    #[test]
    fn norm_stats_constant_series() {
        let stats = fit_norm_stats(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(stats.mean, 5.0);
        assert!(stats.constant);
        let normed = normalize(&[5.0, 5.0], &stats).unwrap();
        assert_eq!(normed, vec![0.0, 0.0]);
        let back = denormalize(&normed, &stats).unwrap();
        assert_eq!(back, vec![5.0, 5.0]);
    }

    #[test]
    fn normalize_basic() {
        let stats = NormStats {
            mean: 2.0,
            std: 1.0,
            constant: false,
        };
        assert_eq!(
            normalize(&[1.0, 2.0, 3.0], &stats).unwrap(),
            vec![-1.0, 0.0, 1.0]
        );
        assert!(matches!(
            normalize(
                &[1.0],
                &NormStats {
                    mean: 0.0,
                    std: 0.0,
                    constant: false
                }
            ),
            Err(SeriesError::InvalidStats { .. })
        ));
    }

    #[test]
    fn partition_examples() {
        assert_eq!(
            partition_horizon(24, 5),
            HorizonPartition {
                short_steps: 6,
                long_steps: 18
            }
        );
        assert_eq!(
            partition_horizon(4, 5),
            HorizonPartition {
                short_steps: 4,
                long_steps: 0
            }
        );
        assert_eq!(
            partition_horizon(1, 0),
            HorizonPartition {
                short_steps: 1,
                long_steps: 0
            }
        );
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..300, frac in 0.05f64..0.95) {
            let s = series(n);
            if let Ok((train, test)) = split_last_fraction(&s, frac) {
                prop_assert_eq!(train.len() + test.len(), n);
                let mut joined = train.values().to_vec();
                joined.extend_from_slice(test.values());
                prop_assert_eq!(joined, s.values().to_vec());
            }
        }

        #[test]
        fn normalize_round_trips(values in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let stats = fit_norm_stats(&values).unwrap();
            if stats.constant || stats.std >= 1e-9 {
                let normed = normalize(&values, &stats).unwrap();
                let back = denormalize(&normed, &stats).unwrap();
                for (a, b) in values.iter().zip(&back) {
                    let tol = 1e-12 * a.abs().max(1.0);
                    prop_assert!((a - b).abs() <= tol);
                }
            }
        }

        #[test]
        fn partition_sums_to_horizon(h in 1usize..10_000, k in 0usize..1_000) {
            let p = partition_horizon(h, k);
            prop_assert_eq!(p.short_steps + p.long_steps, h);
            prop_assert!(p.short_steps >= 1);
        }

        #[test]
        fn norm_stats_match_two_pass_oracle(values in proptest::collection::vec(-1e5f64..1e5, 1..200)) {
            let stats = fit_norm_stats(&values).unwrap();
            // Independent two-pass oracle.
            let n = values.len() as f64;
            let mut mean = 0.0;
            for v in &values {
                mean += v;
            }
            mean /= n;
            let mut var = 0.0;
            for v in &values {
                var += (v - mean) * (v - mean);
            }
            let std = (var / n).sqrt();
            prop_assert!((stats.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            prop_assert!((stats.std - std).abs() <= 1e-12 * std.abs().max(1.0));
        }
    }
}
