//! Reconstruction quality measures: Lyapunov spectra and Kaplan-Yorke
//! dimension, box-counting and correlation dimensions, state-space
//! divergences, sliced Wasserstein distance, power-spectrum distances and
//! short-term forecast scores.

mod dimension;
mod forecast;
mod lyapunov;
mod spectral;
mod stsp;
mod wasserstein;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use dimension::{
    box_counting_dim, correlation_dim, geometric_grid, DimensionEstimate, MIN_EPS_LEVELS,
    MIN_PAIRS_PER_LEVEL,
};
pub use forecast::{mase, pointwise_errors, vpt, ForecastError};
pub use lyapunov::{
    kaplan_yorke, kaplan_yorke_dimension, lyapunov_spectrum, FlowTangent, LyapunovSpectrum,
    ModelTangent, TangentMap, MIN_LYAPUNOV_STEPS,
};
pub use spectral::{
    gaussian_smooth, hellinger_distance, hellinger_spectral, power_spectrum, smoothed_spectra,
    spectral_distance, SpectralVariant, MIN_SPECTRAL_ROWS,
};
pub use stsp::{
    default_gmm_sigma, dstsp_binned, dstsp_gmm, kl_divergence, GmmMode, MAX_BINNED_DIM,
    MIN_STSP_ROWS,
};
pub use wasserstein::{sliced_w1, wasserstein_1d};

use crate::error::{invalid, Result};
use crate::models::Model;
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Mixture-KL approximation selected in [`MeasureConfig`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmmEstimator {
    #[default]
    MonteCarlo,
    Variational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    pub n_bins_per_dim: usize,
    /// Component standard deviation on standardized data; `None` selects
    /// [`default_gmm_sigma`].
    pub gmm_sigma: Option<f64>,
    pub gmm_estimator: GmmEstimator,
    pub n_mc_samples: usize,
    pub n_projections: usize,
    /// Quantile step of the 1D `W1`. The estimator integrates exactly over
    /// the sample breakpoints, so this only records the required bound.
    pub quantile_resolution: f64,
    /// Spectral smoothing standard deviation in frequency bins.
    pub smoothing_sigma: f64,
    pub spectral_variant: SpectralVariant,
    /// Theiler window for the correlation dimension; `None` selects the
    /// autocorrelation lag of the first channel.
    pub theiler_window: Option<usize>,
    pub vpt_epsilon: f64,
    pub vpt_error: ForecastError,
    /// Generated steps dropped before comparison; `None` drops the first
    /// 10%.
    pub transient_discard: Option<usize>,
    pub lyapunov_steps: usize,
    pub lyapunov_transient: usize,
    /// Model spectra are skipped above this latent dimension.
    pub lyapunov_max_dim: usize,
    pub renorm_interval: usize,
    pub seed: u64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            n_bins_per_dim: 30,
            gmm_sigma: None,
            gmm_estimator: GmmEstimator::MonteCarlo,
            n_mc_samples: 1000,
            n_projections: 256,
            quantile_resolution: 1e-3,
            smoothing_sigma: 20.0,
            spectral_variant: SpectralVariant::Hellinger,
            theiler_window: None,
            vpt_epsilon: 0.3,
            vpt_error: ForecastError::Nrmse,
            transient_discard: None,
            lyapunov_steps: 100_000,
            lyapunov_transient: 1000,
            lyapunov_max_dim: 64,
            renorm_interval: 10,
            seed: 0,
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins_per_dim == 0 || self.n_mc_samples == 0 || self.n_projections == 0 {
            return invalid("bin, sample and projection counts must be positive");
        }
        if let Some(s) = self.gmm_sigma {
            if !(s > 0.0) {
                return invalid("gmm_sigma must be positive");
            }
        }
        if !(self.quantile_resolution > 0.0 && self.quantile_resolution <= 0.01) {
            return invalid("quantile_resolution must lie in (0, 0.01]");
        }
        if !(self.smoothing_sigma > 0.0) || !(self.vpt_epsilon > 0.0) {
            return invalid("smoothing_sigma and vpt_epsilon must be positive");
        }
        if self.theiler_window == Some(0) || self.transient_discard == Some(0) {
            return invalid("theiler_window and transient_discard must be positive when set");
        }
        if self.lyapunov_max_dim == 0 {
            return invalid("lyapunov_max_dim must be positive");
        }
        if self.renorm_interval == 0 || self.lyapunov_steps < MIN_LYAPUNOV_STEPS {
            return invalid(format!(
                "renorm_interval must be positive and lyapunov_steps at least {MIN_LYAPUNOV_STEPS}"
            ));
        }
        Ok(())
    }

    /// Steps dropped from the front of a generated trajectory of `len` rows.
    pub fn transient_for(&self, len: usize) -> usize {
        self.transient_discard.unwrap_or(len / 10).min(len)
    }
}

/// What was measured and with which settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seeds: BTreeMap<String, u64>,
    pub config: MeasureConfig,
    pub truth_len: usize,
    pub generated_len: usize,
    pub transient_discarded: usize,
    pub gmm_sigma_used: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub d_stsp_binned: Option<f64>,
    pub d_stsp_gmm: Option<f64>,
    pub sw1: Option<f64>,
    pub d_h: Option<f64>,
    pub lambda_max: Option<f64>,
    pub d_ky: Option<f64>,
    /// Valid prediction time in steps.
    pub vpt: Option<usize>,
    pub mase: Option<f64>,
    pub lyapunov_exponents: Option<Vec<f64>>,
    pub provenance: Provenance,
}

const VPT_CAVEAT: &str = "VPT depends strongly on the threshold and error kind; compare values only under identical settings";

impl EvalReport {
    /// Compares the long-term statistics of `generated` (after dropping its
    /// transient) with `truth`: binned and mixture state-space divergences,
    /// sliced `W1` and the power-spectrum distance. Measures that do not
    /// apply are left empty with a note.
    pub fn long_term<T: Scalar>(truth: &Trajectory<T>, generated: &Trajectory<T>, cfg: &MeasureConfig) -> Result<Self> {
        cfg.validate()?;
        let cut = cfg.transient_for(generated.len());
        let gen = generated.slice(cut..generated.len())?;
        let mut report = EvalReport {
            provenance: Provenance {
                config: cfg.clone(),
                truth_len: truth.len(),
                generated_len: generated.len(),
                transient_discarded: cut,
                ..Default::default()
            },
            ..Default::default()
        };
        let prov = &mut report.provenance;
        prov.seeds.insert("measures".into(), cfg.seed);

        if truth.n_channels() <= MAX_BINNED_DIM {
            report.d_stsp_binned = Some(dstsp_binned(truth, &gen, cfg.n_bins_per_dim)?);
        } else {
            prov.notes.push(format!(
                "binned state-space divergence skipped for {} channels; see the mixture estimate",
                truth.n_channels()
            ));
        }

        let (mean, std) = truth.channel_stats();
        let standardize = |t: &Trajectory<T>| {
            t.map_rows(|r, out| {
                for i in 0..r.len() {
                    out[i] = if std[i] > T::zero() { (r[i] - mean[i]) / std[i] } else { r[i] - mean[i] };
                }
            })
        };
        let (zt, zg) = (standardize(truth)?, standardize(&gen)?);
        let sigma = cfg.gmm_sigma.unwrap_or_else(|| default_gmm_sigma(truth.len(), truth.n_channels()));
        prov.gmm_sigma_used = Some(sigma);
        let mode = match cfg.gmm_estimator {
            GmmEstimator::MonteCarlo => GmmMode::MonteCarlo {
                n_samples: cfg.n_mc_samples,
                seed: cfg.seed,
            },
            GmmEstimator::Variational => GmmMode::Variational,
        };
        report.d_stsp_gmm = Some(dstsp_gmm(&zt, &zg, sigma, mode)?);
        report.sw1 = Some(sliced_w1(truth, &gen, cfg.n_projections, cfg.seed)?);
        report.d_h = Some(spectral_distance(truth, &gen, cfg.smoothing_sigma, cfg.spectral_variant)?);
        Ok(report)
    }

    /// Records the Lyapunov spectrum of `model` along its orbit from `z0`,
    /// with exponents converted to time units by `dt` (per step when 1).
    /// Models wider than `lyapunov_max_dim` are skipped with a note.
    pub fn add_model_lyapunov<T: Scalar>(&mut self, model: &Model<T>, z0: &[T], dt: f64, cfg: &MeasureConfig) -> Result<()> {
        if model.latent_dim() > cfg.lyapunov_max_dim {
            self.provenance.notes.push(format!(
                "Lyapunov spectrum skipped: latent dimension {} exceeds lyapunov_max_dim {}",
                model.latent_dim(),
                cfg.lyapunov_max_dim
            ));
            return Ok(());
        }
        let mut tangent = ModelTangent::new(model);
        let mut z = z0.to_vec();
        tangent.advance(&mut z, cfg.lyapunov_transient)?;
        let spec = lyapunov_spectrum(&mut tangent, &z, cfg.lyapunov_steps, cfg.renorm_interval)?;
        self.set_lyapunov(&spec, dt)
    }

    pub fn set_lyapunov(&mut self, spectrum: &LyapunovSpectrum, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return invalid("dt must be positive");
        }
        let scaled: Vec<f64> = spectrum.exponents.iter().map(|l| l / dt).collect();
        self.lambda_max = Some(scaled[0]);
        self.d_ky = Some(kaplan_yorke_dimension(&scaled)?);
        self.lyapunov_exponents = Some(scaled);
        Ok(())
    }

    /// Scores an aligned forecast of `truth`, with MASE scaled by the
    /// one-step naive error on `insample`.
    pub fn add_forecast<T: Scalar>(
        &mut self,
        truth: &Trajectory<T>,
        forecast: &Trajectory<T>,
        insample: &Trajectory<T>,
        cfg: &MeasureConfig,
    ) -> Result<()> {
        self.vpt = Some(vpt(truth, forecast, cfg.vpt_epsilon, cfg.vpt_error)?);
        self.mase = Some(mase(truth, forecast, insample, 1)?);
        self.provenance.notes.push(VPT_CAVEAT.into());
        Ok(())
    }
}
