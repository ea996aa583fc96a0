//! Turns a config into a grid of cells and executes them against a backend
//! with a bounded worker pool. A cell is one (dataset, horizon, strategy, k)
//! combination; completed cells are skipped on re-run, so an interrupted
//! experiment resumes from where it stopped.

use crate::config::{DatasetEntry, ExperimentConfig};
use anyhow::{Context as _, Result};
use std::collections::VecDeque;
use std::sync::Mutex;
use tsfh_core::backend::{build_backend, Backend, BackendConfig, BackendKind};
use tsfh_core::datasets::{load_series, make_tasks};
use tsfh_core::eval::{EvalTask, TaskRunner};
use tsfh_core::prompts::{default_breath_k, PromptTemplate, Strategy};
use tsfh_core::store::{RunManifest, RunStore};

/// One unit of work in the experiment grid.
#[derive(Debug, Clone)]
pub struct Cell {
    pub id: String,
    pub strategy: Strategy,
    pub breath_k: usize,
    pub task: EvalTask,
}

pub fn cell_id(dataset: &str, horizon: usize, strategy: Strategy, k: usize) -> String {
    format!("{dataset}-h{horizon}-{strategy}-k{k}")
}

fn breath_k_for(entry: &DatasetEntry, strategy: Strategy) -> usize {
    if strategy.uses_breath() {
        entry
            .breath_k
            .unwrap_or_else(|| default_breath_k(entry.spec.frequency))
    } else {
        0
    }
}

/// Load every dataset and build its tasks, without a strategy axis.
pub fn build_eval_tasks(config: &ExperimentConfig) -> Result<Vec<(usize, EvalTask)>> {
    let mut out = Vec::new();
    for (i, entry) in config.datasets.iter().enumerate() {
        let series = load_series(&entry.spec)
            .with_context(|| format!("loading dataset '{}'", entry.spec.name))?;
        let tasks = make_tasks(&series, &entry.spec)
            .with_context(|| format!("building tasks for '{}'", entry.spec.name))?;
        let context = entry.spec.context();
        for task in tasks {
            out.push((
                i,
                EvalTask {
                    task,
                    context: context.clone(),
                    protocol: entry.spec.metric,
                },
            ));
        }
    }
    Ok(out)
}

/// Expand the config into the full cell grid.
pub fn build_cells(config: &ExperimentConfig) -> Result<Vec<Cell>> {
    let tasks = build_eval_tasks(config)?;
    let mut cells = Vec::new();
    for (entry_index, eval_task) in tasks {
        let entry = &config.datasets[entry_index];
        for &strategy in &config.strategies {
            let k = breath_k_for(entry, strategy);
            cells.push(Cell {
                id: cell_id(&entry.spec.name, eval_task.task.horizon(), strategy, k),
                strategy,
                breath_k: k,
                task: eval_task.clone(),
            });
        }
    }
    Ok(cells)
}

pub fn build_task_runner(config: &ExperimentConfig) -> Result<TaskRunner> {
    let template = match &config.template {
        Some(path) => PromptTemplate::from_file(path)
            .with_context(|| format!("loading template {}", path.display()))?,
        None => PromptTemplate::default(),
    };
    Ok(TaskRunner {
        template,
        codec: config.codec.clone(),
        aggregation: config.aggregation,
        options: config.prompt_options,
    })
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failures: Vec<(String, String)>,
}

impl RunSummary {
    /// 0 all cells fine, 2 some cells failed, 3 every attempted cell failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else if self.completed + self.skipped > 0 {
            2
        } else {
            3
        }
    }
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Execute all cells, writing records into the store. Already-recorded
/// cells are counted as skipped.
pub fn run_cells(
    runner: &TaskRunner,
    cells: Vec<Cell>,
    backend: &dyn Backend,
    backend_config: &BackendConfig,
    store: &RunStore,
    workers: usize,
) -> RunSummary {
    let queue = Mutex::new(cells.into_iter().collect::<VecDeque<Cell>>());
    let summary = Mutex::new(RunSummary::default());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let Some(cell) = queue.lock().unwrap().pop_front() else {
                    return;
                };
                if store.has_record(&cell.id) {
                    summary.lock().unwrap().skipped += 1;
                    continue;
                }
                let outcome = runner
                    .run_task(
                        &cell.task.task,
                        &cell.task.context,
                        cell.strategy,
                        cell.breath_k,
                        cell.task.protocol,
                        backend,
                        backend_config,
                        Some(store),
                    )
                    .map_err(|e| e.to_string())
                    .and_then(|record| {
                        store
                            .save_record(&cell.id, &record)
                            .map_err(|e| e.to_string())
                    });
                let mut summary = summary.lock().unwrap();
                match outcome {
                    Ok(()) => summary.completed += 1,
                    Err(message) => summary.failures.push((cell.id.clone(), message)),
                }
            });
        }
    });
    let mut summary = summary.into_inner().unwrap();
    summary.failures.sort();
    summary
}

/// Full `run` flow: store, manifest, backend, cells.
pub fn execute(config: &ExperimentConfig, backend_config: &BackendConfig) -> Result<RunSummary> {
    let store = RunStore::create(&config.output_dir)
        .with_context(|| format!("creating run directory {}", config.output_dir.display()))?;
    store.write_manifest(&RunManifest {
        created_at: now_rfc3339(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(config)?,
    })?;
    let backend = build_backend(backend_config).context("building backend")?;
    let runner = build_task_runner(config)?;
    let cells = build_cells(config)?;
    Ok(run_cells(
        &runner,
        cells,
        backend.as_ref(),
        backend_config,
        &store,
        config.workers,
    ))
}

/// Backend config with the kind swapped for a recording wrapper.
pub fn recording_backend_config(
    base: &BackendConfig,
    cassette: std::path::PathBuf,
) -> BackendConfig {
    let mut config = base.clone();
    config.kind = BackendKind::Recording {
        inner: Box::new(base.kind.clone()),
        cassette,
    };
    config
}

/// Backend config replaying a cassette instead of calling anything live.
pub fn replay_backend_config(base: &BackendConfig, cassette: std::path::PathBuf) -> BackendConfig {
    let mut config = base.clone();
    config.kind = BackendKind::Replay { cassette };
    config
}
