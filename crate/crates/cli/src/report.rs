//! Report layouts over a finished run directory. All output is
//! byte-deterministic: records are iterated in sorted cell-id order and
//! floats are printed with fixed precision.
//!
//! The markdown tables carry two extra columns with results reported in
//! the literature for the long/short prompting method and the LLMTime
//! baseline, joined by (dataset, horizon). Those numbers are published
//! reference points, not something this harness reproduces offline.

use anyhow::{bail, Result};
use std::collections::BTreeMap;
use tsfh_core::eval::{AblationRow, EvalRecord, SweepRow};

/// Published numbers checked in at `reference/published_results.csv`.
const PUBLISHED: &str = include_str!("../../../reference/published_results.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportLayout {
    /// Flat per-cell CSV.
    RecordsCsv,
    /// Flat per-cell newline-delimited JSON.
    RecordsJsonl,
    /// Benchmark-split datasets, raw MAE.
    Table1,
    /// Fixed-horizon datasets, normalized MAE, grouped by dataset.
    Table2,
}

/// Reported results keyed by (table, dataset, horizon, method).
pub struct PublishedReference {
    values: BTreeMap<(String, String, usize, String), String>,
}

impl PublishedReference {
    pub fn bundled() -> Self {
        Self::parse(PUBLISHED)
    }

    fn parse(text: &str) -> Self {
        let mut values = BTreeMap::new();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                continue;
            }
            let horizon: usize = match fields[2].parse() {
                Ok(h) => h,
                Err(_) => continue,
            };
            values.insert(
                (
                    fields[0].to_string(),
                    fields[1].to_string(),
                    horizon,
                    fields[3].to_string(),
                ),
                fields[4].to_string(),
            );
        }
        Self { values }
    }

    fn get(&self, table: &str, dataset: &str, horizon: usize, method: &str) -> String {
        self.values
            .get(&(
                table.to_string(),
                dataset.to_string(),
                horizon,
                method.to_string(),
            ))
            .cloned()
            .unwrap_or_else(|| "-".to_string())
    }
}

fn require_nonempty(records: &[(String, EvalRecord)]) -> Result<()> {
    if records.is_empty() {
        bail!("run directory has no records; nothing to report");
    }
    Ok(())
}

fn fmt(value: f64) -> String {
    format!("{value:.4}")
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(fmt).unwrap_or_else(|| "-".to_string())
}

pub fn records_csv(records: &[(String, EvalRecord)]) -> Result<String> {
    require_nonempty(records)?;
    let mut out = String::from(
        "cell_id,dataset,strategy,horizon,breath_k,mae,normalized_mae,refusals,model_id,backend_id\n",
    );
    for (cell_id, r) in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            cell_id,
            r.dataset,
            r.strategy,
            r.horizon,
            r.breath_k,
            fmt(r.mae),
            fmt_opt(r.normalized_mae),
            r.refusals,
            r.model_id,
            r.backend_id
        ));
    }
    Ok(out)
}

pub fn records_jsonl(records: &[(String, EvalRecord)]) -> Result<String> {
    require_nonempty(records)?;
    let mut out = String::new();
    for (cell_id, record) in records {
        let mut value = serde_json::to_value(record)?;
        if let Some(map) = value.as_object_mut() {
            map.insert(
                "cell_id".to_string(),
                serde_json::Value::String(cell_id.clone()),
            );
        }
        out.push_str(&serde_json::to_string(&value)?);
        out.push('\n');
    }
    Ok(out)
}

/// Benchmark layout: one row per (dataset, horizon, strategy) cell with raw
/// MAE, alongside the published numbers where the dataset names line up.
pub fn table1_markdown(
    records: &[(String, EvalRecord)],
    reference: &PublishedReference,
) -> Result<String> {
    let rows: Vec<&(String, EvalRecord)> = records
        .iter()
        .filter(|(_, r)| r.normalized_mae.is_none())
        .collect();
    require_nonempty(records)?;
    let mut out = String::from(
        "| Dataset | Horizon | Strategy | k | MAE | Reported long/short | Reported LLMTime |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for (_, r) in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            r.dataset,
            r.horizon,
            r.strategy,
            r.breath_k,
            fmt(r.mae),
            reference.get("table1", &r.dataset, r.horizon, "long_short"),
            reference.get("table1", &r.dataset, r.horizon, "llmtime"),
        ));
    }
    Ok(out)
}

/// Fixed-horizons layout: grouped by dataset, one line per horizon,
/// normalized MAE.
pub fn table2_markdown(
    records: &[(String, EvalRecord)],
    reference: &PublishedReference,
) -> Result<String> {
    require_nonempty(records)?;
    let mut grouped: BTreeMap<&str, Vec<&(String, EvalRecord)>> = BTreeMap::new();
    for entry in records {
        if entry.1.normalized_mae.is_some() {
            grouped.entry(entry.1.dataset.as_str()).or_default().push(entry);
        }
    }
    let mut out = String::from(
        "| Dataset | Horizon | Strategy | k | NMAE | Reported long/short | Reported LLMTime |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for (dataset, mut rows) in grouped {
        rows.sort_by_key(|(_, r)| (r.horizon, r.strategy.as_str()));
        for (_, r) in rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                dataset,
                r.horizon,
                r.strategy,
                r.breath_k,
                fmt_opt(r.normalized_mae),
                reference.get("table2", dataset, r.horizon, "long_short"),
                reference.get("table2", dataset, r.horizon, "llmtime"),
            ));
        }
    }
    Ok(out)
}

/// Ablation table: five strategies plus the relative change vs the naive
/// base.
pub fn ablation_markdown(rows: &[AblationRow]) -> Result<String> {
    if rows.is_empty() {
        bail!("ablation produced no rows");
    }
    let mut out = String::from(
        "| Strategy | Mean metric | Delta vs base (%) | Cells | Failed |\n\
         |---|---|---|---|---|\n",
    );
    for row in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row.strategy,
            fmt_opt(row.mean_metric),
            row.delta_vs_base_pct
                .map(|d| format!("{d:+.2}"))
                .unwrap_or_else(|| "-".to_string()),
            row.cells,
            row.failed_cells
        ));
    }
    Ok(out)
}

/// Breath-frequency sweep as a two-column CSV.
pub fn ksweep_csv(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        bail!("sweep produced no rows");
    }
    let mut out = String::from("k,mean_metric\n");
    for row in rows {
        out.push_str(&format!(
            "{},{}\n",
            row.k,
            row.mean_metric
                .map(|m| format!("{m:.6}"))
                .unwrap_or_default()
        ));
    }
    Ok(out)
}
