//! Deterministic serialization of numeric sequences into LLM-friendly text
//! and robust parsing of free-form completions back into numbers.
//!
//! ## Encoding grammar
//!
//! Each value `v` is scaled by `1/β`, rounded to `p` decimal places (half
//! away from zero, the `f64::round` convention applied to `v/β · 10^p`),
//! and rendered as a digit string:
//!
//! - with `strip_decimal_point` (the default), the rendered token is the
//!   decimal digits of `round(v/β · 10^p)` with no point and no leading
//!   zeros, prefixed by `-` for negative values ("1.23" becomes "123",
//!   "0.5" becomes "5");
//! - without stripping, the token is a plain fixed-point number with
//!   exactly `p` decimals.
//!
//! Tokens are joined by `value_separator` (default `", "`). The separator
//! must contain no digits so the stream stays unambiguous. Decoding
//! re-inserts the point (value = digits / 10^p · β) and tolerates prose,
//! markdown fences, newlines, and un-stripped decimal points around the
//! numeric tokens.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

/// Smallest scale the quantile fit will return.
pub const MIN_SCALE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid codec config: {0}")]
    InvalidConfig(String),
    #[error("value {value} out of encodable range (|value/scale| must be < 1e15)")]
    ValueOutOfRange { value: f64 },
    #[error("negative value {value} but signs are not allowed by the codec config")]
    SignNotAllowed { value: f64 },
    #[error("no numeric values found in completion")]
    NoValuesFound,
    #[error("partial decode: found {} of {} values", diagnostics.values_found, diagnostics.values_expected)]
    PartialDecode {
        values: Vec<f64>,
        diagnostics: DecodeDiagnostics,
    },
}

/// Numeric text-encoding parameters. Fields omitted in config files fall
/// back to the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodecConfig {
    /// Decimal places after scaling, `p`.
    pub precision: u32,
    /// Quantile of |reference| used to fit the scale, `α` in (0, 1].
    pub scale_quantile: f64,
    /// Scale divisor `β`, fitted from the reference window.
    pub scale: f64,
    pub value_separator: String,
    pub strip_decimal_point: bool,
    pub sign_allowed: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            precision: 2,
            scale_quantile: 0.95,
            scale: 1.0,
            value_separator: ", ".to_string(),
            strip_decimal_point: true,
            sign_allowed: true,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.precision > 10 {
            return Err(CodecError::InvalidConfig(format!(
                "precision {} exceeds 10",
                self.precision
            )));
        }
        if !(self.scale > 0.0) {
            return Err(CodecError::InvalidConfig(format!(
                "scale {} must be positive",
                self.scale
            )));
        }
        if !(self.scale_quantile > 0.0 && self.scale_quantile <= 1.0) {
            return Err(CodecError::InvalidConfig(format!(
                "scale_quantile {} must be in (0, 1]",
                self.scale_quantile
            )));
        }
        if self.value_separator.is_empty() || self.value_separator.chars().any(|c| c.is_ascii_digit())
        {
            return Err(CodecError::InvalidConfig(
                "value_separator must be non-empty and digit-free".to_string(),
            ));
        }
        Ok(())
    }

    /// Copy of this config with `scale` refitted on a reference window.
    pub fn with_fitted_scale(&self, reference: &[f64]) -> Result<Self, CodecError> {
        let scale = fit_scale(reference, self.scale_quantile)?;
        Ok(Self {
            scale,
            ..self.clone()
        })
    }
}

/// What the decoder saw while parsing one completion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeDiagnostics {
    pub values_found: usize,
    pub values_expected: usize,
    /// Non-numeric text preceding the first decoded token.
    pub stripped_prefix: String,
    pub truncated: bool,
    /// Tokens that deviated from the grammar but were still recoverable
    /// (a decimal point the model failed to strip).
    pub repaired_tokens: usize,
}

/// Fit the scale divisor `β` as the `quantile`-quantile of `|reference|`,
/// floored at [`MIN_SCALE`].
pub fn fit_scale(reference: &[f64], quantile: f64) -> Result<f64, CodecError> {
    if reference.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(CodecError::InvalidConfig(format!(
            "quantile {quantile} must be in (0, 1]"
        )));
    }
    let mut magnitudes: Vec<f64> = reference.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(|a, b| a.total_cmp(b));
    let n = magnitudes.len();
    let index = ((quantile * n as f64).ceil() as usize).clamp(1, n) - 1;
    Ok(magnitudes[index].max(MIN_SCALE))
}

fn pow10(p: u32) -> f64 {
    10f64.powi(p as i32)
}

/// Render one already-scaled-and-rounded magnitude as a token.
fn render_token(quantized: i128, precision: u32, strip: bool) -> String {
    let negative = quantized < 0;
    let magnitude = quantized.unsigned_abs();
    let body = if strip {
        magnitude.to_string()
    } else if precision == 0 {
        magnitude.to_string()
    } else {
        let divisor = 10u128.pow(precision);
        format!(
            "{}.{:0width$}",
            magnitude / divisor,
            magnitude % divisor,
            width = precision as usize
        )
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Deterministically encode a sequence of values as text.
pub fn encode_series(values: &[f64], config: &CodecConfig) -> Result<String, CodecError> {
    config.validate()?;
    let mut tokens = Vec::with_capacity(values.len());
    for &value in values {
        if !value.is_finite() {
            return Err(CodecError::ValueOutOfRange { value });
        }
        let scaled = value / config.scale;
        if scaled.abs() >= 1e15 {
            return Err(CodecError::ValueOutOfRange { value });
        }
        if scaled < 0.0 && !config.sign_allowed {
            return Err(CodecError::SignNotAllowed { value });
        }
        let quantized = (scaled * pow10(config.precision)).round() as i128;
        tokens.push(render_token(
            quantized,
            config.precision,
            config.strip_decimal_point,
        ));
    }
    Ok(tokens.join(&config.value_separator))
}

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\d+(?:\.\d+)?").expect("static regex"))
}

/// Parse a free-form completion back into up to `expected_count` values.
///
/// Scans left to right, skipping non-numeric prose, and stops at the first
/// structurally invalid tail. Fewer than `expected_count` recovered values
/// is a [`CodecError::PartialDecode`] carrying what was found.
pub fn decode_completion(
    text: &str,
    config: &CodecConfig,
    expected_count: usize,
) -> Result<(Vec<f64>, DecodeDiagnostics), CodecError> {
    config.validate()?;
    if expected_count == 0 {
        return Err(CodecError::InvalidConfig(
            "expected_count must be >= 1".to_string(),
        ));
    }
    let mut values = Vec::with_capacity(expected_count);
    let mut diagnostics = DecodeDiagnostics {
        values_expected: expected_count,
        ..DecodeDiagnostics::default()
    };
    let divisor = pow10(config.precision);
    for m in token_regex().find_iter(text) {
        if values.len() == expected_count {
            break;
        }
        let token = m.as_str();
        let value = if token.contains('.') {
            // The model kept a decimal point the grammar strips; the token
            // is then the scaled value itself.
            diagnostics.repaired_tokens += 1;
            match token.parse::<f64>() {
                Ok(scaled) => scaled * config.scale,
                Err(_) => break,
            }
        } else {
            match token.parse::<i128>() {
                Ok(q) => (q as f64) / divisor * config.scale,
                // Digit run too long for the grammar: invalid tail.
                Err(_) => break,
            }
        };
        if values.is_empty() {
            diagnostics.stripped_prefix = text[..m.start()].to_string();
        }
        values.push(value);
    }
    diagnostics.values_found = values.len();
    diagnostics.truncated = values.len() < expected_count;
    if values.is_empty() {
        return Err(CodecError::NoValuesFound);
    }
    if diagnostics.truncated {
        return Err(CodecError::PartialDecode {
            values,
            diagnostics,
        });
    }
    Ok((values, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(precision: u32, scale: f64) -> CodecConfig {
        CodecConfig {
            precision,
            scale,
            ..CodecConfig::default()
        }
    }

    #[test]
    fn fit_scale_max_quantile() {
        let values: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(fit_scale(&values, 1.0).unwrap(), 100.0);
    }

    #[test]
    fn fit_scale_floors_at_min() {
        assert_eq!(fit_scale(&[0.0, 0.0, 0.0], 0.95).unwrap(), MIN_SCALE);
    }

    #[test]
    fn fit_scale_matches_sort_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..400);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e4..1e4)).collect();
            let q = rng.gen_range(0.01..=1.0);
            let got = fit_scale(&values, q).unwrap();
            // Brute-force oracle: smallest magnitude m such that at least
            // ceil(q * n) magnitudes are <= m.
            let need = (q * n as f64).ceil().max(1.0) as usize;
            let mut best = f64::INFINITY;
            for cand in &values {
                let m = cand.abs();
                let covered = values.iter().filter(|v| v.abs() <= m).count();
                if covered >= need && m < best {
                    best = m;
                }
            }
            let expect = best.max(MIN_SCALE);
            assert!(
                (got - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                "q={q} got={got} expect={expect}"
            );
        }
    }

    #[test]
    fn encode_examples() {
        let c = cfg(1, 1.0);
        assert_eq!(encode_series(&[1.0, 2.0], &c).unwrap(), "10, 20");
        assert_eq!(encode_series(&[123.4], &cfg(2, 100.0)).unwrap(), "123");
        assert_eq!(encode_series(&[-0.5], &cfg(1, 1.0)).unwrap(), "-5");
    }

    #[test]
    fn encode_keeps_point_when_not_stripped() {
        let c = CodecConfig {
            precision: 2,
            strip_decimal_point: false,
            ..CodecConfig::default()
        };
        assert_eq!(encode_series(&[1.234, -0.5], &c).unwrap(), "1.23, -0.50");
    }

    #[test]
    fn encode_rejects_out_of_range_and_sign() {
        let c = cfg(2, 1.0);
        assert!(matches!(
            encode_series(&[1e16], &c),
            Err(CodecError::ValueOutOfRange { .. })
        ));
        let unsigned = CodecConfig {
            sign_allowed: false,
            ..cfg(2, 1.0)
        };
        assert!(matches!(
            encode_series(&[-1.0], &unsigned),
            Err(CodecError::SignNotAllowed { .. })
        ));
    }

    #[test]
    fn decode_exact_inverse() {
        let c = cfg(1, 1.0);
        let (values, diag) = decode_completion("10, 20", &c, 2).unwrap();
        assert_eq!(values, vec![1.0, 2.0]);
        assert_eq!(diag.values_found, 2);
        assert!(!diag.truncated);
        assert_eq!(diag.stripped_prefix, "");
    }

    #[test]
    fn decode_strips_prose_prefix() {
        let c = cfg(1, 1.0);
        let (values, diag) =
            decode_completion("Sure! Here is my forecast: 10, 20", &c, 2).unwrap();
        assert_eq!(values, vec![1.0, 2.0]);
        assert_eq!(diag.stripped_prefix, "Sure! Here is my forecast: ");
    }

    #[test]
    fn decode_partial_is_an_error() {
        let c = cfg(1, 1.0);
        match decode_completion("10, 2", &c, 3) {
            Err(CodecError::PartialDecode {
                values,
                diagnostics,
            }) => {
                assert_eq!(values, vec![1.0, 0.2]);
                assert_eq!(diagnostics.values_found, 2);
                assert!(diagnostics.truncated);
            }
            other => panic!("expected PartialDecode, got {other:?}"),
        }
    }

    #[test]
    fn decode_no_values() {
        let c = cfg(1, 1.0);
        assert!(matches!(
            decode_completion("I cannot predict the future.", &c, 2),
            Err(CodecError::NoValuesFound)
        ));
    }

    #[test]
    fn decode_repairs_unstripped_points() {
        let c = cfg(2, 10.0);
        let (values, diag) = decode_completion("1.50, 230", &c, 2).unwrap();
        assert!((values[0] - 15.0).abs() < 1e-12);
        assert!((values[1] - 23.0).abs() < 1e-12);
        assert_eq!(diag.repaired_tokens, 1);
    }

    proptest! {
        #[test]
        fn round_trip_exact(x in -1e9f64..1e9, p in 0u32..=6, beta_idx in 0usize..4) {
            let beta = [1e-3, 1.0, 10.0, 100.0][beta_idx];
            prop_assume!((x / beta).abs() < 1e12);
            let c = cfg(p, beta);
            let text = encode_series(&[x], &c).unwrap();
            let (decoded, _) = decode_completion(&text, &c, 1).unwrap();
            let expected = (x / beta * pow10(p)).round() / pow10(p) * beta;
            prop_assert_eq!(decoded[0], expected);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let text = String::from_utf8_lossy(&bytes).to_string();
            let c = CodecConfig::default();
            let _ = decode_completion(&text, &c, 5);
        }

        #[test]
        fn encode_round_trips_whole_sequences(
            values in proptest::collection::vec(-1e6f64..1e6, 1..40),
            p in 0u32..=4,
        ) {
            let c = cfg(p, 1.0);
            let text = encode_series(&values, &c).unwrap();
            let (decoded, diag) = decode_completion(&text, &c, values.len()).unwrap();
            prop_assert_eq!(decoded.len(), values.len());
            prop_assert_eq!(diag.repaired_tokens, 0);
            for (orig, dec) in values.iter().zip(&decoded) {
                let expected = (orig * pow10(p)).round() / pow10(p);
                prop_assert_eq!(*dec, expected);
            }
        }
    }
}
