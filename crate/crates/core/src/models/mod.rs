//! Surrogate model families, their step maps and Jacobians, the linear
//! observation model, and free-running generation.
//!
//! The AL-RNN places its ReLU units in the last `P` latent coordinates. The
//! ReLU derivative at exactly zero is taken as zero.

mod alrnn;
mod checkpoint;
mod observation;
mod reservoir;
mod shplrnn;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use alrnn::AlRnn;
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use observation::ObservationModel;
pub use reservoir::Reservoir;
pub use shplrnn::ShPlrnn;

use crate::dynsys::DIVERGENCE_BOUND;
use crate::error::{invalid, Error, Result};
use crate::linalg::{spectral_radius, Mat};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// A model whose parameters are learned by gradient descent.
///
/// Parameters are exposed as one flat vector in a fixed family-specific
/// order; `vjp` is the reverse-mode derivative of one step.
pub trait Trainable<T: Scalar> {
    fn latent_dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn params(&self) -> Vec<T>;
    fn set_params(&mut self, params: &[T]) -> Result<()>;
    fn step_into(&self, z: &[T], out: &mut [T]);
    fn jacobian_into(&self, z: &[T], out: &mut Mat<T>);
    /// Given the cotangent `g` of the step output at input `z`, adds the
    /// parameter gradient to `grad_params` and writes the input cotangent
    /// into `grad_state`.
    fn vjp(&self, z: &[T], g: &[T], grad_params: &mut [T], grad_state: &mut [T]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    AlRnn,
    ShPlrnn,
    Reservoir,
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "al_rnn" | "alrnn" => Ok(Self::AlRnn),
            "shplrnn" | "sh_plrnn" => Ok(Self::ShPlrnn),
            "reservoir" | "rc" => Ok(Self::Reservoir),
            _ => invalid(format!("unknown model family '{s}'")),
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AlRnn => "al_rnn",
            Self::ShPlrnn => "shplrnn",
            Self::Reservoir => "reservoir",
        })
    }
}

/// A model of any family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model<T> {
    AlRnn(AlRnn<T>),
    ShPlrnn(ShPlrnn<T>),
    Reservoir(Reservoir<T>),
}

impl<T: Scalar> Model<T> {
    pub fn family(&self) -> ModelFamily {
        match self {
            Self::AlRnn(_) => ModelFamily::AlRnn,
            Self::ShPlrnn(_) => ModelFamily::ShPlrnn,
            Self::Reservoir(_) => ModelFamily::Reservoir,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Self::AlRnn(m) => m.latent_dim(),
            Self::ShPlrnn(m) => m.latent_dim(),
            Self::Reservoir(m) => m.reservoir_dim(),
        }
    }

    /// Autonomous update. The reservoir runs closed-loop on its own readout.
    pub fn step_into(&self, z: &[T], out: &mut [T]) {
        match self {
            Self::AlRnn(m) => m.step_into(z, out),
            Self::ShPlrnn(m) => m.step_into(z, out),
            Self::Reservoir(m) => m.closed_loop_step_into(z, out),
        }
    }

    pub fn step(&self, z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.latent_dim()];
        self.step_into(z, &mut out);
        out
    }

    /// Jacobian of the autonomous update.
    pub fn jacobian_into(&self, z: &[T], out: &mut Mat<T>) {
        match self {
            Self::AlRnn(m) => m.jacobian_into(z, out),
            Self::ShPlrnn(m) => m.jacobian_into(z, out),
            Self::Reservoir(m) => m.closed_loop_jacobian_into(z, out),
        }
    }

    pub fn jacobian(&self, z: &[T]) -> Mat<T> {
        let m = self.latent_dim();
        let mut out = Mat::zeros(m, m);
        self.jacobian_into(z, &mut out);
        out
    }

    /// Observation of a latent state; the reservoir uses its trained readout
    /// instead of `om`.
    pub fn observe(&self, om: &ObservationModel<T>, z: &[T]) -> Vec<T> {
        match self {
            Self::Reservoir(rc) => rc.readout(z),
            _ => om.observe(z),
        }
    }

    pub fn trainable(&self) -> Option<&dyn Trainable<T>> {
        match self {
            Self::AlRnn(m) => Some(m),
            Self::ShPlrnn(m) => Some(m),
            Self::Reservoir(_) => None,
        }
    }

    pub fn trainable_mut(&mut self) -> Option<&mut dyn Trainable<T>> {
        match self {
            Self::AlRnn(m) => Some(m),
            Self::ShPlrnn(m) => Some(m),
            Self::Reservoir(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Self::AlRnn(m) => m.params().iter().all(|v| v.is_finite()),
            Self::ShPlrnn(m) => m.params().iter().all(|v| v.is_finite()),
            Self::Reservoir(m) => m.w_out.is_finite(),
        }
    }

    /// Free-running roll-out from `z0`. Returns the latent states
    /// `z_1..z_n` and their observations, on a unit time axis starting at 1.
    pub fn generate(
        &self,
        om: &ObservationModel<T>,
        z0: &[T],
        n_steps: usize,
    ) -> Result<(Trajectory<T>, Trajectory<T>)> {
        let m = self.latent_dim();
        if z0.len() != m {
            return Err(Error::DimensionMismatch {
                context: "initial latent state",
                expected: m,
                got: z0.len(),
            });
        }
        if n_steps == 0 {
            return invalid("n_steps must be at least 1");
        }
        if !matches!(self, Self::Reservoir(_)) && om.latent_dim() != m {
            return Err(Error::DimensionMismatch {
                context: "observation model latent dimension",
                expected: m,
                got: om.latent_dim(),
            });
        }
        let bound = T::lit(DIVERGENCE_BOUND);
        let mut z = z0.to_vec();
        let mut next = vec![T::zero(); m];
        let mut latent = Vec::with_capacity(n_steps * m);
        let mut observed = Vec::new();
        for step in 1..=n_steps {
            self.step_into(&z, &mut next);
            if next.iter().any(|v| !v.is_finite() || v.abs() > bound) {
                return Err(Error::Diverged { step });
            }
            std::mem::swap(&mut z, &mut next);
            latent.extend_from_slice(&z);
            observed.extend(self.observe(om, &z));
        }
        let n_obs = observed.len() / n_steps;
        Ok((
            Trajectory::new(Mat::from_row_major(n_steps, m, latent)?, T::one(), T::one())?,
            Trajectory::new(
                Mat::from_row_major(n_steps, n_obs, observed)?,
                T::one(),
                T::one(),
            )?,
        ))
    }
}

/// Sizes of a model to initialise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    /// `M` (reservoir size for the reservoir family).
    pub latent_dim: usize,
    /// `P`, AL-RNN only.
    #[serde(default)]
    pub relu_units: usize,
    /// `H`, shPLRNN only.
    #[serde(default)]
    pub hidden_dim: usize,
    /// `N`.
    pub obs_dim: usize,
}

impl ModelSpec {
    pub fn al_rnn(latent_dim: usize, relu_units: usize, obs_dim: usize) -> Self {
        Self {
            family: ModelFamily::AlRnn,
            latent_dim,
            relu_units,
            hidden_dim: 0,
            obs_dim,
        }
    }

    pub fn sh_plrnn(latent_dim: usize, hidden_dim: usize, obs_dim: usize) -> Self {
        Self {
            family: ModelFamily::ShPlrnn,
            latent_dim,
            relu_units: 0,
            hidden_dim,
            obs_dim,
        }
    }

    pub fn reservoir(size: usize, obs_dim: usize) -> Self {
        Self {
            family: ModelFamily::Reservoir,
            latent_dim: size,
            relu_units: 0,
            hidden_dim: 0,
            obs_dim,
        }
    }

    /// Default sizes: AL-RNN `M=20, P=3`, shPLRNN `M=max(3,N), H=50`,
    /// reservoir `M=500`.
    pub fn default_for(family: ModelFamily, obs_dim: usize) -> Self {
        match family {
            ModelFamily::AlRnn => Self::al_rnn(20.max(obs_dim), 3, obs_dim),
            ModelFamily::ShPlrnn => Self::sh_plrnn(3.max(obs_dim), 50, obs_dim),
            ModelFamily::Reservoir => Self::reservoir(500, obs_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.obs_dim == 0 {
            return invalid("latent and observation dimensions must be positive");
        }
        match self.family {
            ModelFamily::AlRnn | ModelFamily::ShPlrnn if self.obs_dim > self.latent_dim => invalid(
                format!(
                    "observation dimension {} exceeds latent dimension {}",
                    self.obs_dim, self.latent_dim
                ),
            ),
            ModelFamily::AlRnn if self.relu_units > self.latent_dim => invalid(format!(
                "relu_units {} exceeds latent dimension {}",
                self.relu_units, self.latent_dim
            )),
            ModelFamily::ShPlrnn if self.hidden_dim == 0 => invalid("hidden_dim must be positive"),
            _ => Ok(()),
        }
    }
}

/// Random initialisation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitScheme {
    /// Range of the diagonal `A` entries.
    pub a_min: f64,
    pub a_max: f64,
    /// Multiplier on the `N(0, 1/fan_in)` coupling weights.
    pub weight_gain: f64,
    pub rc_alpha: f64,
    /// Fraction of non-zero recurrent reservoir weights.
    pub rc_sparsity: f64,
    pub rc_spectral_radius: f64,
    pub rc_input_scale: f64,
    pub rc_bias_scale: f64,
}

impl Default for InitScheme {
    fn default() -> Self {
        Self {
            a_min: 0.5,
            a_max: 0.95,
            weight_gain: 1.0,
            rc_alpha: 0.0,
            rc_sparsity: 0.1,
            rc_spectral_radius: 0.95,
            rc_input_scale: 0.1,
            rc_bias_scale: 0.1,
        }
    }
}

impl InitScheme {
    fn validate(&self) -> Result<()> {
        if !(self.a_min <= self.a_max) {
            return invalid("a_min must not exceed a_max");
        }
        if !(self.weight_gain >= 0.0) {
            return invalid("weight_gain must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.rc_alpha) {
            return invalid("rc_alpha must lie in [0, 1]");
        }
        if !(self.rc_sparsity > 0.0 && self.rc_sparsity <= 1.0) {
            return invalid("rc_sparsity must lie in (0, 1]");
        }
        if !(self.rc_spectral_radius > 0.0) {
            return invalid("rc_spectral_radius must be positive");
        }
        Ok(())
    }
}

fn gaussian<T: Scalar>(rng: &mut ChaCha8Rng, scale: f64) -> T {
    let v: f64 = StandardNormal.sample(rng);
    T::lit(v * scale)
}

/// Draws a fresh model. Identical arguments always give identical weights.
///
/// PLRNN families: `A` uniform in `[a_min, a_max]`, coupling weights
/// Gaussian with variance `gain²/fan_in` (the AL-RNN `W` has a zero
/// diagonal), biases zero. Reservoir: sparse Gaussian `W` rescaled to the
/// target spectral radius, `W_in` and `b` uniform in `[-1, 1]` times their
/// scales, `W_out = 0`.
pub fn init_model<T: Scalar>(spec: &ModelSpec, seed: u64, scheme: &InitScheme) -> Result<Model<T>> {
    spec.validate()?;
    scheme.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.latent_dim;
    let diag = |rng: &mut ChaCha8Rng| -> Vec<T> {
        (0..m)
            .map(|_| T::lit(rng.random_range(scheme.a_min..=scheme.a_max)))
            .collect()
    };
    Ok(match spec.family {
        ModelFamily::AlRnn => {
            let a = diag(&mut rng);
            let s = scheme.weight_gain / (m as f64).sqrt();
            let w = Mat::from_fn(m, m, |i, j| if i == j { T::zero() } else { gaussian(&mut rng, s) });
            Model::AlRnn(AlRnn::new(a, w, vec![T::zero(); m], spec.relu_units)?)
        }
        ModelFamily::ShPlrnn => {
            let h = spec.hidden_dim;
            let a = diag(&mut rng);
            let s1 = scheme.weight_gain / (h as f64).sqrt();
            let s2 = scheme.weight_gain / (m as f64).sqrt();
            let w1 = Mat::from_fn(m, h, |_, _| gaussian(&mut rng, s1));
            let w2 = Mat::from_fn(h, m, |_, _| gaussian(&mut rng, s2));
            Model::ShPlrnn(ShPlrnn::new(a, w1, w2, vec![T::zero(); m], vec![T::zero(); h])?)
        }
        ModelFamily::Reservoir => {
            let n = spec.obs_dim;
            let w = sparse_recurrent(&mut rng, m, scheme)?;
            let w_in = Mat::from_fn(m, n, |_, _| {
                T::lit(rng.random_range(-1.0..=1.0) * scheme.rc_input_scale)
            });
            let b = (0..m)
                .map(|_| T::lit(rng.random_range(-1.0..=1.0) * scheme.rc_bias_scale))
                .collect();
            Model::Reservoir(Reservoir::new(
                T::lit(scheme.rc_alpha),
                w,
                w_in,
                b,
                Mat::zeros(n, m),
                T::lit(scheme.rc_spectral_radius),
            )?)
        }
    })
}

fn sparse_recurrent<T: Scalar>(rng: &mut ChaCha8Rng, m: usize, scheme: &InitScheme) -> Result<Mat<T>> {
    for _ in 0..100 {
        let w: Mat<f64> = Mat::from_fn(m, m, |_, _| {
            if rng.random::<f64>() < scheme.rc_sparsity {
                StandardNormal.sample(rng)
            } else {
                0.0
            }
        });
        let rho = spectral_radius(&w);
        if rho > 1e-12 {
            return Ok(w.scaled(scheme.rc_spectral_radius / rho).cast());
        }
    }
    invalid("could not draw a reservoir matrix with non-zero spectral radius; raise rc_sparsity")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in [ModelFamily::AlRnn, ModelFamily::ShPlrnn, ModelFamily::Reservoir] {
            assert_eq!(f.to_string().parse::<ModelFamily>().unwrap(), f);
        }
        assert!("lstm".parse::<ModelFamily>().is_err());
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        let spec = ModelSpec::al_rnn(20, 3, 3);
        let a: Model<f64> = init_model(&spec, 5, &InitScheme::default()).unwrap();
        let b: Model<f64> = init_model(&spec, 5, &InitScheme::default()).unwrap();
        let c: Model<f64> = init_model(&spec, 6, &InitScheme::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let Model::AlRnn(m) = a else { panic!() };
        assert!(m.a.iter().all(|&v| (0.5..=0.95).contains(&v)));
        assert!(m.h.iter().all(|&v| v == 0.0));
        assert!((0..20).all(|i| m.w[(i, i)] == 0.0));
    }

    #[test]
    fn init_rejects_bad_sizes() {
        let s = InitScheme::default();
        assert!(init_model::<f64>(&ModelSpec::al_rnn(2, 3, 1), 0, &s).is_err());
        assert!(init_model::<f64>(&ModelSpec::al_rnn(2, 1, 3), 0, &s).is_err());
        assert!(init_model::<f64>(&ModelSpec::sh_plrnn(3, 0, 3), 0, &s).is_err());
        assert!(init_model::<f64>(&ModelSpec::reservoir(0, 3), 0, &s).is_err());
    }

    #[test]
    fn generate_constant_after_one_step() {
        let h = vec![0.3, -0.1];
        let m = Model::AlRnn(AlRnn::new(vec![0.0; 2], Mat::zeros(2, 2), h.clone(), 1).unwrap());
        let om = ObservationModel::identity_prefix(1, 2).unwrap();
        let (lat, obs) = m.generate(&om, &[5.0, 7.0], 4).unwrap();
        assert_eq!(lat.len(), 4);
        assert!(lat.rows().all(|r| r == h.as_slice()));
        assert_eq!(obs.column(0), vec![0.3; 4]);
        let (one, _) = m.generate(&om, &[5.0, 7.0], 1).unwrap();
        assert_eq!(one.row(0), m.step(&[5.0, 7.0]).as_slice());
    }

    #[test]
    fn generate_reports_divergence() {
        let m = Model::AlRnn(AlRnn::new(vec![10.0], Mat::zeros(1, 1), vec![0.0], 0).unwrap());
        let om = ObservationModel::identity_prefix(1, 1).unwrap();
        assert_eq!(
            m.generate(&om, &[1.0], 100).unwrap_err(),
            Error::Diverged { step: 9 }
        );
    }
}
