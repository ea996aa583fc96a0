//! On-disk layout of one experiment run.
//!
//! ```text
//! <run_dir>/
//!   manifest.json            config snapshot + code version
//!   records/<cell_id>.json   one EvalRecord per completed cell
//!   prompts/<hash>.txt       rendered prompt bytes, keyed by SHA-256
//!   completions/<hash>.json  raw completions, keyed by request hash
//! ```
//!
//! Record writes are temp-file-then-rename, so an interrupted run leaves
//! every record either complete or absent and the run stays resumable.

use crate::backend::Completion;
use crate::eval::EvalRecord;
use serde::{Deserialize, Serialize};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

/// Run provenance written next to the records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_at: String,
    pub code_version: String,
    pub config: serde_json::Value,
}

impl RunStore {
    pub fn create(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(dir.join("records"))?;
        std::fs::create_dir_all(dir.join("prompts"))?;
        std::fs::create_dir_all(dir.join("completions"))?;
        Ok(Self { dir })
    }

    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        if !dir.join("records").is_dir() {
            return Err(io::Error::new(
                io::ErrorKind::NotFound,
                format!("{} is not a run directory", dir.display()),
            ));
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn atomic_write(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        let parent = path.parent().expect("store paths have parents");
        let tmp = parent.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> io::Result<()> {
        let text = serde_json::to_string_pretty(manifest)?;
        self.atomic_write(&self.dir.join("manifest.json"), text.as_bytes())
    }

    pub fn read_manifest(&self) -> io::Result<RunManifest> {
        let text = std::fs::read_to_string(self.dir.join("manifest.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn record_path(&self, cell_id: &str) -> PathBuf {
        self.dir.join("records").join(format!("{cell_id}.json"))
    }

    pub fn has_record(&self, cell_id: &str) -> bool {
        self.record_path(cell_id).is_file()
    }

    pub fn save_record(&self, cell_id: &str, record: &EvalRecord) -> io::Result<()> {
        let text = serde_json::to_string_pretty(record)?;
        self.atomic_write(&self.record_path(cell_id), text.as_bytes())
    }

    pub fn load_record(&self, cell_id: &str) -> io::Result<EvalRecord> {
        let text = std::fs::read_to_string(self.record_path(cell_id))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// All records, sorted by cell id for deterministic reporting.
    pub fn load_all_records(&self) -> io::Result<Vec<(String, EvalRecord)>> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(self.dir.join("records"))? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let cell_id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let text = std::fs::read_to_string(&path)?;
            let record: EvalRecord = serde_json::from_str(&text)?;
            out.push((cell_id, record));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    pub fn save_prompt(&self, prompt_hash: &str, text: &str) -> io::Result<()> {
        self.atomic_write(
            &self.dir.join("prompts").join(format!("{prompt_hash}.txt")),
            text.as_bytes(),
        )
    }

    pub fn load_prompt(&self, prompt_hash: &str) -> io::Result<String> {
        std::fs::read_to_string(self.dir.join("prompts").join(format!("{prompt_hash}.txt")))
    }

    pub fn save_completion(&self, completion: &Completion) -> io::Result<()> {
        let text = serde_json::to_string_pretty(completion)?;
        self.atomic_write(
            &self
                .dir
                .join("completions")
                .join(format!("{}.json", completion.request_hash)),
            text.as_bytes(),
        )
    }

    pub fn load_completion(&self, request_hash: &str) -> io::Result<Completion> {
        let text = std::fs::read_to_string(
            self.dir
                .join("completions")
                .join(format!("{request_hash}.json")),
        )?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Dump all records as one newline-delimited JSON file.
    pub fn export_jsonl(&self, path: &Path) -> io::Result<()> {
        let mut lines = String::new();
        for (cell_id, record) in self.load_all_records()? {
            let mut value = serde_json::to_value(&record)?;
            if let Some(map) = value.as_object_mut() {
                map.insert("cell_id".to_string(), serde_json::Value::String(cell_id));
            }
            lines.push_str(&serde_json::to_string(&value)?);
            lines.push('\n');
        }
        std::fs::write(path, lines)
    }
}
