use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::System;
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// Linear drift of one named parameter between two times; the value is held
/// at `start_value` before `start_time` and at `end_value` after `end_time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSpec<T> {
    pub parameter_name: String,
    pub start_value: T,
    pub end_value: T,
    pub start_time: T,
    pub end_time: T,
}

impl<T: Scalar> RampSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.end_time > self.start_time) {
            return invalid("ramp end_time must exceed start_time");
        }
        Ok(())
    }

    pub fn value_at(&self, t: T) -> T {
        if t <= self.start_time {
            self.start_value
        } else if t >= self.end_time {
            self.end_value
        } else {
            let frac = (t - self.start_time) / (self.end_time - self.start_time);
            self.start_value + frac * (self.end_value - self.start_value)
        }
    }
}

/// Settings for [`integrate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec<T> {
    pub dt: T,
    pub n_steps: usize,
    /// Standard deviation of the additive state noise per unit time.
    pub noise_std: T,
    /// Optional per-channel multipliers on `noise_std` (e.g. noise on `V` only).
    pub noise_scale: Option<Vec<T>>,
    pub ramp: Option<RampSpec<T>>,
    pub seed: u64,
    pub t0: T,
}

impl<T: Scalar> IntegrationSpec<T> {
    pub fn new(dt: T, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            noise_std: T::zero(),
            noise_scale: None,
            ramp: None,
            seed: 0,
            t0: T::zero(),
        }
    }

    pub fn with_noise(mut self, noise_std: T, seed: u64) -> Self {
        self.noise_std = noise_std;
        self.seed = seed;
        self
    }

    pub fn with_noise_scale(mut self, scale: Vec<T>) -> Self {
        self.noise_scale = Some(scale);
        self
    }

    pub fn with_ramp(mut self, ramp: RampSpec<T>) -> Self {
        self.ramp = Some(ramp);
        self
    }
}

/// Classical fourth-order Runge-Kutta stepper with reusable stage buffers.
#[derive(Clone, Debug)]
pub struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    pub fn new(dim: usize) -> Self {
        let z = vec![T::zero(); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    /// Advances `x` by one step of size `dt` in place.
    pub fn step(&mut self, system: &System<T>, x: &mut [T], dt: T) {
        let half = dt * T::lit(0.5);
        system.vector_field_into(x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k1[i];
        }
        system.vector_field_into(&self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + half * self.k2[i];
        }
        system.vector_field_into(&self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        system.vector_field_into(&self.tmp, &mut self.k4);
        let sixth = dt / T::lit(6.0);
        for i in 0..x.len() {
            x[i] += sixth * (self.k1[i] + (self.k2[i] + self.k3[i]) * T::lit(2.0) + self.k4[i]);
        }
    }
}

/// Integrates `system` from `x0`, returning `n_steps + 1` rows (the initial
/// state included). Noise, when enabled, is added after each deterministic
/// step as `noise_std · √dt · ξ` with `ξ ~ N(0, I)`; identical inputs and
/// seed always give identical output.
pub fn integrate<T: Scalar>(
    system: &System<T>,
    x0: &[T],
    spec: &IntegrationSpec<T>,
) -> Result<Trajectory<T>> {
    system.validate()?;
    let dim = system.dim();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "initial condition",
            expected: dim,
            got: x0.len(),
        });
    }
    if !(spec.dt > T::zero()) {
        return invalid("dt must be positive");
    }
    if spec.n_steps == 0 {
        return invalid("n_steps must be at least 1");
    }
    if spec.noise_std < T::zero() {
        return invalid("noise_std must be non-negative");
    }
    if let Some(scale) = &spec.noise_scale {
        if scale.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "noise scale",
                expected: dim,
                got: scale.len(),
            });
        }
    }
    let mut sys = system.clone();
    if let Some(ramp) = &spec.ramp {
        ramp.validate()?;
        sys.param(&ramp.parameter_name)?;
    }

    let bound = T::lit(DIVERGENCE_BOUND);
    let noisy = spec.noise_std > T::zero();
    let noise_amp = spec.noise_std * spec.dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rk = Rk4::new(dim);
    let mut x = x0.to_vec();
    let mut data = Vec::with_capacity((spec.n_steps + 1) * dim);
    data.extend_from_slice(&x);

    for step in 0..spec.n_steps {
        if let Some(ramp) = &spec.ramp {
            let t = spec.t0 + spec.dt * T::from_count(step);
            sys.set_param(&ramp.parameter_name, ramp.value_at(t))?;
        }
        rk.step(&sys, &mut x, spec.dt);
        if noisy {
            for (i, xi) in x.iter_mut().enumerate() {
                let xi_draw: f64 = StandardNormal.sample(&mut rng);
                let scale = spec.noise_scale.as_ref().map_or(T::one(), |s| s[i]);
                *xi += noise_amp * scale * T::lit(xi_draw);
            }
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > bound) {
            return Err(Error::Diverged { step: step + 1 });
        }
        data.extend_from_slice(&x);
    }
    Trajectory::new(
        Mat::from_row_major(spec.n_steps + 1, dim, data)?,
        spec.dt,
        spec.t0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_invariant() {
        let tr = integrate(
            &System::<f64>::lorenz(),
            &[0.0, 0.0, 0.0],
            &IntegrationSpec::new(0.01, 500),
        )
        .unwrap();
        assert_eq!(tr.len(), 501);
        assert!(tr.samples().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noisy_runs_are_reproducible_per_seed() {
        let sys = System::<f64>::lorenz();
        let spec = IntegrationSpec::new(0.01, 300).with_noise(0.5, 7);
        let a = integrate(&sys, &[1.0, 1.0, 1.0], &spec).unwrap();
        let b = integrate(&sys, &[1.0, 1.0, 1.0], &spec).unwrap();
        assert_eq!(a, b);
        let c = integrate(&sys, &[1.0, 1.0, 1.0], &spec.clone().with_noise(0.5, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ramp_holds_outside_window() {
        let r = RampSpec {
            parameter_name: "gNMDA".into(),
            start_value: 1.0,
            end_value: 3.0,
            start_time: 10.0,
            end_time: 20.0,
        };
        assert_eq!(r.value_at(0.0), 1.0);
        assert_eq!(r.value_at(15.0), 2.0);
        assert_eq!(r.value_at(99.0), 3.0);
        let bad = RampSpec { end_time: 5.0, ..r };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ramp_on_unknown_parameter_fails() {
        let spec = IntegrationSpec::new(0.01, 10).with_ramp(RampSpec {
            parameter_name: "omega".into(),
            start_value: 0.0,
            end_value: 1.0,
            start_time: 0.0,
            end_time: 1.0,
        });
        assert!(matches!(
            integrate(&System::<f64>::lorenz(), &[1.0, 1.0, 1.0], &spec),
            Err(Error::UnknownParameter(_))
        ));
    }

    #[test]
    fn divergence_reports_step() {
        // rho < 0 is rejected; a huge dt blows the explicit scheme up instead.
        let err = integrate(
            &System::<f64>::lorenz(),
            &[1.0, 1.0, 1.0],
            &IntegrationSpec::new(1.0, 100),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { step } if step >= 1));
    }

    #[test]
    fn rejects_bad_spec() {
        let sys = System::<f64>::lorenz();
        assert!(integrate(&sys, &[1.0, 1.0, 1.0], &IntegrationSpec::new(0.0, 10)).is_err());
        assert!(integrate(&sys, &[1.0, 1.0, 1.0], &IntegrationSpec::new(0.01, 0)).is_err());
        assert!(integrate(&sys, &[1.0, 1.0], &IntegrationSpec::new(0.01, 1)).is_err());
    }
}
