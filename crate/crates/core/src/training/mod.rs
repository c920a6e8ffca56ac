//! Reconstruction training: backpropagation through time under sparse or
//! generalized teacher forcing, multiple shooting, and closed-form ridge
//! regression for reservoir readouts.

mod adam;
mod bptt;
mod ridge;
mod shooting;
mod teacher;

use serde::{Deserialize, Serialize};

pub use adam::{clip_global_norm, Adam};
pub use bptt::{
    bptt_gradients, gtf_jacobian_product_norm, max_step_singular_value, segment_loss, Forcing,
    SegmentGradient,
};
pub use ridge::{ridge_design, ridge_loss_gradient, train_rc_ridge, RidgeFit, MAX_RIDGE_CONDITION};
pub use shooting::{
    multiple_shooting_gradients, multiple_shooting_loss, train_ms, MsConfig, MsGradient, MsResult,
};
pub use teacher::{train_gtf, train_stf};

use crate::error::{invalid, Result};

/// Mini-batch optimisation settings shared by all gradient-based trainers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Multiplicative learning-rate factor applied after every epoch.
    pub lr_decay: f64,
    pub n_epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    /// Observations per training segment (the roll-out has one step fewer).
    pub sequence_length: usize,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    /// Consecutive divergent epochs tolerated before training aborts.
    pub patience: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            lr_decay: 1.0,
            n_epochs: 100,
            batches_per_epoch: 50,
            batch_size: 16,
            sequence_length: 200,
            clip_norm: 10.0,
            patience: 5,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return invalid("learning_rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return invalid("lr_decay must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return invalid("batch_size and batches_per_epoch must be positive");
        }
        if self.sequence_length < 2 {
            return invalid("sequence_length must be at least 2");
        }
        if !(self.clip_norm > 0.0) {
            return invalid("clip_norm must be positive");
        }
        Ok(())
    }
}

/// Sparse teacher forcing settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StfConfig {
    /// Forcing interval `τ` in steps.
    pub interval: usize,
    /// Number of leading latent units replaced at forcing times; defaults to
    /// the observation dimension.
    #[serde(default)]
    pub forced_units: Option<usize>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl StfConfig {
    pub fn new(interval: usize) -> Self {
        Self {
            interval,
            forced_units: None,
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return invalid("forcing interval must be at least 1");
        }
        if self.optimizer.sequence_length < self.interval {
            return invalid("sequence_length must be at least the forcing interval");
        }
        self.optimizer.validate()
    }
}

/// Forcing strength for generalized teacher forcing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSetting {
    Fixed { value: f64 },
    /// `α = 1 − 1/σ_max`, re-estimated from every batch, clamped at 0.
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtfConfig {
    pub alpha: AlphaSetting,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl GtfConfig {
    pub fn validate(&self) -> Result<()> {
        if let AlphaSetting::Fixed { value } = self.alpha {
            if !(0.0..=1.0).contains(&value) {
                return invalid(format!("alpha must lie in [0, 1], got {value}"));
            }
        }
        self.optimizer.validate()
    }
}

/// Per-epoch and per-batch training record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Mean batch loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Forcing strength used for each batch (GTF only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alphas: Vec<f64>,
    /// Largest training-time Jacobian-product norm of each batch (adaptive
    /// GTF only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jacobian_product_norms: Vec<f64>,
    /// Batches whose loss or gradient was not finite and were skipped.
    pub skipped_batches: usize,
}

impl TrainingHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// `ln 2 / λ_max`, in the time units of `lambda_max`.
pub fn predictability_time(lambda_max: f64) -> Result<f64> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return invalid(format!("lambda_max must be positive, got {lambda_max}"));
    }
    Ok(std::f64::consts::LN_2 / lambda_max)
}

/// Predictability time converted to a whole number of samples (nearest,
/// at least 1).
pub fn forcing_interval(lambda_max: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return invalid("dt must be positive");
    }
    let steps = (predictability_time(lambda_max)? / dt).round();
    Ok((steps as usize).max(1))
}
