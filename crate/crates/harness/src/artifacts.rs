//! Run directory layout, atomic writes and the run manifest.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use dsr_core::models::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result, Stage};
use crate::ingest::ChannelStats;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MODEL_FILE: &str = "model.json";
pub const ROLLOUT_FILE: &str = "rollout.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TRAIN_LOG_FILE: &str = "train_log.json";

pub const MANIFEST_FORMAT: &str = "dsr-run";

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| HarnessError::io(path, e))?;
        w.flush().map_err(|e| HarnessError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::config(format!("cannot serialize {}: {e}", path.display())))?;
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        line: e.line() as u64,
        column: Some(e.column()),
        message: e.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    /// A stage failed; artifacts listed in the manifest may be partial.
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Option<Stage>,
    pub message: String,
}

/// Quantities chosen while the pipeline ran.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub n_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub dt: f64,
    pub standardization: Option<ChannelStats>,
    /// `(channel, dimension, lag)` of the delay embedding, if any.
    pub embedding: Option<(usize, usize, usize)>,
    pub model_spec: Option<ModelSpec>,
    /// Largest Lyapunov exponent of the simulator, per time unit.
    pub ground_truth_lambda_max: Option<f64>,
    pub forcing_interval: Option<usize>,
    pub rollout_initial_state: Option<Vec<f64>>,
}

/// Everything needed to rerun an experiment and audit its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub harness_version: String,
    pub status: RunStatus,
    pub config: ExperimentConfig,
    pub seeds: BTreeMap<String, u64>,
    pub resolved: Resolved,
    pub conventions: Vec<String>,
    pub stages_completed: Vec<Stage>,
    pub artifacts: Vec<String>,
    pub failure: Option<Failure>,
}

impl Manifest {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            harness_version: env!("CARGO_PKG_VERSION").into(),
            status: RunStatus::Running,
            seeds: config.seeds(),
            config,
            resolved: Resolved::default(),
            conventions: Vec::new(),
            stages_completed: Vec::new(),
            artifacts: Vec::new(),
            failure: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        if m.format != MANIFEST_FORMAT {
            return Err(HarnessError::config(format!(
                "{} is not a run manifest (format `{}`)",
                path.display(),
                m.format
            )));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn record_artifact(&mut self, name: &str) {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
    }
}
