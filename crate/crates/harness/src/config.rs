//! Experiment configuration, its JSON schema and seed derivation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use dsr_core::dynsys::SystemId;
use dsr_core::measures::MeasureConfig;
use dsr_core::models::{InitScheme, ModelFamily, ModelSpec};
use dsr_core::training::{AlphaSetting, GtfConfig, MsConfig, OptimizerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// JSON schema mirrored by [`ExperimentConfig`].
pub const EXPERIMENT_SCHEMA: &str = include_str!("../schema/experiment.schema.json");

/// Labels of the per-stage seeds derived from the master seed.
pub const SEED_LABELS: [&str; 5] = ["simulation", "observation_noise", "init", "training", "measures"];

/// Independent stream seed for `label`: the first eight bytes of
/// `SHA-256(master ‖ label)`, little endian.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Overridden by the command-line output directory when one is given.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    /// Z-score channels with training-split statistics.
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub embedding: Option<EmbeddingOverrides>,
    pub model: ModelConfig,
    pub training: TrainingMethod,
    #[serde(default)]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub measures: MeasureConfig,
}

fn default_true() -> bool {
    true
}

/// Where the observations come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    System(SimulationSource),
    Csv(CsvSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSource {
    pub system: SystemId,
    /// Parameter overrides by name.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub dt: f64,
    /// Rows kept after the transient (the initial state is not counted).
    pub n_steps: usize,
    /// Steps simulated and discarded before recording.
    #[serde(default)]
    pub transient: usize,
    #[serde(default)]
    pub initial_condition: Option<Vec<f64>>,
    /// Process-noise standard deviation per unit time.
    #[serde(default)]
    pub process_noise: f64,
    #[serde(default)]
    pub process_noise_scale: Option<Vec<f64>>,
    /// Observation noise standard deviation as a percentage of each
    /// channel's standard deviation.
    #[serde(default)]
    pub observation_noise_percent: f64,
    /// Recorded state coordinates; all by default.
    #[serde(default)]
    pub observed_channels: Option<Vec<usize>>,
}

impl SimulationSource {
    pub fn initial_state(&self) -> Vec<f64> {
        self.initial_condition.clone().unwrap_or_else(|| match self.system {
            SystemId::Lorenz => vec![1.0, 1.0, 1.0],
            SystemId::Neuron => vec![-60.0, 0.0, 0.05],
            SystemId::Neuron2d => vec![-50.0, 0.0],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Required for files without a time column.
    #[serde(default)]
    pub dt: Option<f64>,
}

/// Contiguous train/test split: the first `train_fraction` of the rows
/// train, the following `test_fraction` are held out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            test_fraction: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("train_fraction", self.train_fraction), ("test_fraction", self.test_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(HarnessError::config(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        if self.train_fraction + self.test_fraction > 1.0 + 1e-12 {
            return Err(HarnessError::config("train_fraction + test_fraction must not exceed 1"));
        }
        Ok(())
    }

    /// Row counts `(train, test)` for a series of `n` rows.
    pub fn counts(&self, n: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let train = (self.train_fraction * n as f64).floor() as usize;
        let test = ((self.test_fraction * n as f64).floor() as usize).min(n - train);
        if train < 2 || test < 1 {
            return Err(HarnessError::config(format!(
                "a split of {n} rows leaves {train} training and {test} test rows"
            )));
        }
        Ok((train, test))
    }
}

/// Delay embedding of one channel; unset values are selected on the
/// training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingOverrides {
    #[serde(default)]
    pub channel: usize,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub lag: Option<usize>,
    #[serde(default = "default_max_dimension")]
    pub max_dimension: usize,
    #[serde(default = "default_fnn_ratio")]
    pub fnn_ratio: f64,
}

fn default_max_dimension() -> usize {
    10
}

fn default_fnn_ratio() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: ModelFamily,
    #[serde(default)]
    pub latent_dim: Option<usize>,
    #[serde(default)]
    pub relu_units: Option<usize>,
    #[serde(default)]
    pub hidden_dim: Option<usize>,
    #[serde(default)]
    pub init: InitScheme,
}

impl ModelConfig {
    /// Family defaults with the configured sizes applied.
    pub fn spec(&self, obs_dim: usize) -> ModelSpec {
        let mut spec = ModelSpec::default_for(self.family, obs_dim);
        if let Some(m) = self.latent_dim {
            spec.latent_dim = m;
        }
        if let Some(p) = self.relu_units {
            spec.relu_units = p;
        }
        if let Some(h) = self.hidden_dim {
            spec.hidden_dim = h;
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TrainingMethod {
    /// Sparse teacher forcing. Without an interval, `τ` is the
    /// predictability time of the simulated system in samples.
    Stf {
        #[serde(default)]
        interval: Option<usize>,
        #[serde(default)]
        forced_units: Option<usize>,
        #[serde(default)]
        optimizer: OptimizerConfig,
    },
    Gtf(GtfConfig),
    Ms(MsConfig),
    /// Closed-form readout of a reservoir.
    Ridge {
        #[serde(default = "default_ridge_lambda")]
        lambda: f64,
        #[serde(default = "default_washout")]
        washout: usize,
    },
}

fn default_ridge_lambda() -> f64 {
    1e-4
}

fn default_washout() -> usize {
    100
}

impl TrainingMethod {
    pub fn optimizer(&self) -> Option<&OptimizerConfig> {
        match self {
            Self::Stf { optimizer, .. } => Some(optimizer),
            Self::Gtf(g) => Some(&g.optimizer),
            Self::Ms(m) => Some(&m.optimizer),
            Self::Ridge { .. } => None,
        }
    }

    pub fn optimizer_mut(&mut self) -> Option<&mut OptimizerConfig> {
        match self {
            Self::Stf { optimizer, .. } => Some(optimizer),
            Self::Gtf(g) => Some(&mut g.optimizer),
            Self::Ms(m) => Some(&mut m.optimizer),
            Self::Ridge { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Stf { .. } => "stf",
            Self::Gtf(_) => "gtf",
            Self::Ms(_) => "ms",
            Self::Ridge { .. } => "ridge",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutConfig {
    pub n_steps: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self { n_steps: 10_000 }
    }
}

fn schema_validator() -> &'static jsonschema::Validator {
    static VALIDATOR: OnceLock<jsonschema::Validator> = OnceLock::new();
    VALIDATOR.get_or_init(|| {
        let schema: serde_json::Value = serde_json::from_str(EXPERIMENT_SCHEMA).expect("embedded schema is valid JSON");
        jsonschema::validator_for(&schema).expect("embedded schema compiles")
    })
}

/// Checks a JSON document against the experiment schema, reporting every
/// violation with its JSON pointer.
pub fn validate_against_schema(value: &serde_json::Value) -> Result<()> {
    let errors: Vec<String> = schema_validator()
        .iter_errors(value)
        .map(|e| {
            let at = e.instance_path().to_string();
            format!("{}: {e}", if at.is_empty() { "/" } else { at.as_str() })
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::config(format!("schema violation: {}", errors.join("; "))))
    }
}

/// Checks a serialized [`MeasureConfig`] against its schema definition.
pub fn validate_measure_config(value: &serde_json::Value) -> Result<()> {
    let schema: serde_json::Value = serde_json::from_str(EXPERIMENT_SCHEMA).expect("embedded schema is valid JSON");
    let mut sub = schema["$defs"]["measures"].clone();
    sub["$defs"] = schema["$defs"].clone();
    let validator = jsonschema::validator_for(&sub).expect("measure schema compiles");
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::config(format!("measure config schema violation: {}", errors.join("; "))))
    }
}

/// Reads a `.json` or TOML config file into an unvalidated JSON document.
pub fn load_value(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
            path: path.display().to_string(),
            line: e.line() as u64,
            column: Some(e.column()),
            message: e.to_string(),
        })
    } else {
        toml::from_str(&text).map_err(|e| HarnessError::config(format!("{}: TOML: {e}", path.display())))
    }
}

/// Sets the dotted `key.path` of `doc` to `raw`, parsed as a TOML value
/// (bare words that do not parse are taken as strings). Missing tables are
/// created.
pub fn apply_override(doc: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::config(format!("override `{assignment}` is not of the form key.path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(HarnessError::config(format!("override `{assignment}` has an empty key")));
    }
    let raw = raw.trim();
    let value: serde_json::Value = match toml::from_str::<BTreeMap<String, serde_json::Value>>(&format!("v = {raw}")) {
        Ok(mut table) => table.remove("v").expect("key present"),
        Err(_) => serde_json::Value::String(raw.to_string()),
    };
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            return Err(HarnessError::config(format!("override `{path}`: `{key}` is not inside a table")));
        }
        node = node
            .as_object_mut()
            .expect("checked")
            .entry(key.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(HarnessError::config(format!("override `{path}` does not address a table entry"))),
    }
}

impl ExperimentConfig {
    /// Parses TOML text, validates it against the schema and then
    /// semantically. Relative CSV paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let value: serde_json::Value =
            toml::from_str(text).map_err(|e| HarnessError::config(format!("TOML: {e}")))?;
        Self::from_json_value(value, base_dir)
    }

    pub fn from_json_value(value: serde_json::Value, base_dir: Option<&Path>) -> Result<Self> {
        validate_against_schema(&value)?;
        let mut cfg: Self = serde_json::from_value(value).map_err(|e| HarnessError::config(e.to_string()))?;
        if let (Some(base), DataSource::Csv(c)) = (base_dir, &mut cfg.data) {
            if c.path.is_relative() {
                c.path = base.join(&c.path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    /// Loads a config file and applies `key.path=value` overrides before
    /// validation.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let mut value = load_value(path)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_json_value(value, path.parent())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn seeds(&self) -> BTreeMap<String, u64> {
        SEED_LABELS
            .iter()
            .map(|l| (l.to_string(), derive_seed(self.seed, l)))
            .collect()
    }

    pub fn seed_for(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.data {
            DataSource::System(s) => {
                if !(s.dt > 0.0) {
                    return Err(HarnessError::config("data.dt must be positive"));
                }
                if s.n_steps < 2 {
                    return Err(HarnessError::config("data.n_steps must be at least 2"));
                }
                if !(s.process_noise >= 0.0) || !(s.observation_noise_percent >= 0.0) {
                    return Err(HarnessError::config("noise levels must be non-negative"));
                }
                let dim = dsr_core::System64::from_id(s.system).dim();
                if s.initial_state().len() != dim {
                    return Err(HarnessError::config(format!(
                        "initial_condition needs {dim} values for {}",
                        s.system
                    )));
                }
                if let Some(ch) = &s.observed_channels {
                    if ch.is_empty() || ch.iter().any(|&c| c >= dim) {
                        return Err(HarnessError::config(format!(
                            "observed_channels must be a non-empty subset of 0..{dim}"
                        )));
                    }
                }
            }
            DataSource::Csv(c) => {
                if !c.path.is_file() {
                    return Err(HarnessError::config(format!("data file {} does not exist", c.path.display())));
                }
                if let Some(dt) = c.dt {
                    if !(dt > 0.0) {
                        return Err(HarnessError::config("data.dt must be positive"));
                    }
                }
                if matches!(self.training, TrainingMethod::Stf { interval: None, .. }) {
                    return Err(HarnessError::config(
                        "STF on file data needs training.interval; the predictability time is only known for simulated systems",
                    ));
                }
            }
        }
        self.split.validate()?;
        if let Some(e) = &self.embedding {
            if e.dimension == Some(0) || e.lag == Some(0) || e.max_dimension == 0 || !(e.fnn_ratio > 0.0) {
                return Err(HarnessError::config("embedding dimension, lag, max_dimension and fnn_ratio must be positive"));
            }
        }
        let is_rc = self.model.family == ModelFamily::Reservoir;
        match (&self.training, is_rc) {
            (TrainingMethod::Ridge { lambda, .. }, true) => {
                if !(*lambda >= 0.0) {
                    return Err(HarnessError::config("ridge lambda must be non-negative"));
                }
            }
            (TrainingMethod::Ridge { .. }, false) => {
                return Err(HarnessError::config("ridge training applies to the reservoir family only"))
            }
            (_, true) => return Err(HarnessError::config("the reservoir family is trained with method = \"ridge\"")),
            _ => {}
        }
        match &self.training {
            TrainingMethod::Stf {
                interval, optimizer, ..
            } => {
                if *interval == Some(0) {
                    return Err(HarnessError::config("training.interval must be at least 1"));
                }
                optimizer.validate()?;
            }
            TrainingMethod::Gtf(g) => g.validate()?,
            TrainingMethod::Ms(m) => m.validate()?,
            TrainingMethod::Ridge { .. } => {}
        }
        if let TrainingMethod::Gtf(GtfConfig {
            alpha: AlphaSetting::Fixed { value },
            ..
        }) = &self.training
        {
            if !(0.0..=1.0).contains(value) {
                return Err(HarnessError::config("alpha must lie in [0, 1]"));
            }
        }
        if self.rollout.n_steps == 0 {
            return Err(HarnessError::config("rollout.n_steps must be positive"));
        }
        self.measures.validate()?;
        Ok(())
    }
}
