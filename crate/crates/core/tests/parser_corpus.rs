//! Runs the decoder over the checked-in adversarial completion corpus:
//! prose preambles, markdown fences, truncation, interleaved units, and
//! assorted formatting drift observed in model output.

use serde::Deserialize;
use std::path::PathBuf;
use tsfh_core::codec::{decode_completion, CodecConfig, CodecError};

#[derive(Debug, Deserialize)]
struct CorpusCase {
    name: String,
    text: String,
    precision: u32,
    scale: f64,
    expected_count: usize,
    kind: String,
    #[serde(default)]
    values: Vec<f64>,
    #[serde(default)]
    prefix_nonempty: bool,
    #[serde(default)]
    repaired: Option<usize>,
}

fn corpus_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fixtures/parser_corpus.json")
}

fn load_corpus() -> Vec<CorpusCase> {
    let text = std::fs::read_to_string(corpus_path()).expect("corpus fixture");
    serde_json::from_str(&text).expect("corpus parses")
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn corpus_has_at_least_twenty_cases() {
    assert!(load_corpus().len() >= 20);
}

#[test]
fn adversarial_corpus_contracts_hold() {
    for case in load_corpus() {
        let config = CodecConfig {
            precision: case.precision,
            scale: case.scale,
            ..CodecConfig::default()
        };
        let result = decode_completion(&case.text, &config, case.expected_count);
        match case.kind.as_str() {
            "ok" => {
                let (values, diag) = result.unwrap_or_else(|e| {
                    panic!("case {}: expected success, got {e:?}", case.name)
                });
                assert_eq!(values.len(), case.values.len(), "case {}", case.name);
                for (got, want) in values.iter().zip(&case.values) {
                    assert!(approx_eq(*got, *want), "case {}: {got} != {want}", case.name);
                }
                assert_eq!(diag.values_found, case.expected_count, "case {}", case.name);
                assert!(!diag.truncated, "case {}", case.name);
                if case.prefix_nonempty {
                    assert!(!diag.stripped_prefix.is_empty(), "case {}", case.name);
                }
                if let Some(repaired) = case.repaired {
                    assert_eq!(diag.repaired_tokens, repaired, "case {}", case.name);
                }
            }
            "partial" => match result {
                Err(CodecError::PartialDecode {
                    values,
                    diagnostics,
                }) => {
                    assert_eq!(values.len(), case.values.len(), "case {}", case.name);
                    for (got, want) in values.iter().zip(&case.values) {
                        assert!(approx_eq(*got, *want), "case {}: {got} != {want}", case.name);
                    }
                    assert_eq!(diagnostics.values_found, case.values.len(), "case {}", case.name);
                    assert!(diagnostics.truncated, "case {}", case.name);
                }
                other => panic!("case {}: expected PartialDecode, got {other:?}", case.name),
            },
            "refusal" => assert!(
                matches!(result, Err(CodecError::NoValuesFound)),
                "case {}: expected NoValuesFound",
                case.name
            ),
            other => panic!("case {}: unknown kind {other}", case.name),
        }
    }
}
