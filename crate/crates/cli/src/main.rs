//! `tsfh`: experiment orchestration for the zero-shot forecasting harness.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 run finished
//! with some failed cells, 3 every attempted cell failed.

mod config;
mod report;
mod runner;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use tsfh_core::backend::build_backend;
use tsfh_core::eval::{ablation_suite, sweep_k};
use tsfh_core::prompts::default_breath_k;
use tsfh_core::store::RunStore;

use config::ExperimentConfig;
use report::{PublishedReference, ReportLayout};
use runner::RunSummary;

#[derive(Parser)]
#[command(name = "tsfh", version, about = "Zero-shot LLM time-series forecasting harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config).map_err(anyhow::Error::new)?;
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(workers) = self.workers {
            config.workers = workers.max(1);
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute the full experiment grid, resuming completed cells.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// List the cells and prompt sizes without calling any backend.
        #[arg(long)]
        dry_run: bool,
    },
    /// Render a report layout from a finished run directory.
    Report {
        /// Run directory written by `run`.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, value_enum)]
        layout: ReportLayout,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the breath frequency over the configured `ks` list.
    SweepK {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated list overriding `ks` in the config.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// Run the five-strategy ablation and write `ablation.md`.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Breath frequency; defaults to the first dataset's rule.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the grid through the configured backend while appending every
    /// completion to a cassette for later replay.
    Record {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        cassette: PathBuf,
    },
    /// Run the grid against a cassette; any unrecorded request fails.
    Replay {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        cassette: PathBuf,
    },
    /// Parse and validate a config file, printing the resolved grid size.
    ValidateConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            1
        }
    });
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, dry_run } => {
            let config = config.load()?;
            if dry_run {
                return dry_run_grid(&config);
            }
            let summary = runner::execute(&config, &config.backend.clone())?;
            print_summary(&summary);
            Ok(summary.exit_code())
        }
        Command::Report { run_dir, layout, out } => {
            let store = RunStore::open(&run_dir)
                .with_context(|| format!("opening run directory {}", run_dir.display()))?;
            let records = store.load_all_records().context("loading records")?;
            let reference = PublishedReference::bundled();
            let text = match layout {
                ReportLayout::RecordsCsv => report::records_csv(&records)?,
                ReportLayout::RecordsJsonl => report::records_jsonl(&records)?,
                ReportLayout::Table1 => report::table1_markdown(&records, &reference)?,
                ReportLayout::Table2 => report::table2_markdown(&records, &reference)?,
            };
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::SweepK { config, ks } => {
            let config = config.load()?;
            let ks = ks
                .or_else(|| config.ks.clone())
                .context("no `ks` in config and no --ks flag")?;
            let tasks: Vec<_> = runner::build_eval_tasks(&config)?
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            let backend = build_backend(&config.backend)?;
            let task_runner = runner::build_task_runner(&config)?;
            let rows = sweep_k(&task_runner, &tasks, &ks, backend.as_ref(), &config.backend, None)?;
            let csv = report::ksweep_csv(&rows)?;
            std::fs::create_dir_all(&config.output_dir)?;
            let path = config.output_dir.join("ksweep.csv");
            std::fs::write(&path, &csv)?;
            println!("wrote {}", path.display());
            print!("{csv}");
            Ok(0)
        }
        Command::Ablate { config, k } => {
            let config = config.load()?;
            let first = &config.datasets[0];
            let k = k
                .or(first.breath_k)
                .unwrap_or_else(|| default_breath_k(first.spec.frequency));
            let tasks: Vec<_> = runner::build_eval_tasks(&config)?
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            let backend = build_backend(&config.backend)?;
            let task_runner = runner::build_task_runner(&config)?;
            let rows = ablation_suite(
                &task_runner,
                &tasks,
                k,
                backend.as_ref(),
                &config.backend,
                None,
            )?;
            let table = report::ablation_markdown(&rows)?;
            std::fs::create_dir_all(&config.output_dir)?;
            let path = config.output_dir.join("ablation.md");
            std::fs::write(&path, &table)?;
            println!("wrote {}", path.display());
            print!("{table}");
            Ok(0)
        }
        Command::Record { config, cassette } => {
            let config = config.load()?;
            let backend_config = runner::recording_backend_config(&config.backend, cassette);
            let summary = runner::execute(&config, &backend_config)?;
            print_summary(&summary);
            Ok(summary.exit_code())
        }
        Command::Replay { config, cassette } => {
            let config = config.load()?;
            let backend_config = runner::replay_backend_config(&config.backend, cassette);
            let summary = runner::execute(&config, &backend_config)?;
            print_summary(&summary);
            Ok(summary.exit_code())
        }
        Command::ValidateConfig { config } => {
            let config = config.load()?;
            let cells = runner::build_cells(&config)?;
            println!(
                "config ok: {} dataset(s), {} strategy(ies), {} cell(s)",
                config.datasets.len(),
                config.strategies.len(),
                cells.len()
            );
            Ok(0)
        }
    }
}

fn dry_run_grid(config: &ExperimentConfig) -> Result<i32> {
    let task_runner = runner::build_task_runner(config)?;
    let cells = runner::build_cells(config)?;
    for cell in &cells {
        let (prompt, _) = task_runner.render_prompt(
            &cell.task.task,
            &cell.task.context,
            cell.strategy,
            cell.breath_k,
        )?;
        println!("{}  prompt_bytes={}", cell.id, prompt.text.len());
    }
    println!("{} cell(s); no backend calls made", cells.len());
    Ok(0)
}

fn print_summary(summary: &RunSummary) {
    println!(
        "completed {} cell(s), skipped {}, failed {}",
        summary.completed,
        summary.skipped,
        summary.failures.len()
    );
    for (cell_id, message) in &summary.failures {
        eprintln!("failed {cell_id}: {message}");
    }
}

fn emit(out: Option<&std::path::Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
