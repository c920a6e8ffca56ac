//! Ground-truth dynamical systems, fixed-step integration with optional
//! process noise and parameter ramps, and limit-behaviour classification.

mod classify;
mod integrate;
mod lorenz;
mod neuron;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use classify::{classify_limit_behavior, spike_regime, LimitBehavior, SpikeRegime};
pub use integrate::{integrate, IntegrationSpec, RampSpec, Rk4, DIVERGENCE_BOUND};
pub use lorenz::{lorenz_vector_field, LorenzParams};
pub use neuron::{neuron_vector_field, NeuronParams};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Names of the built-in systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    Lorenz,
    /// Full three-dimensional neuron model.
    Neuron,
    /// Planar neuron reduction with the slow gate `h` held constant.
    Neuron2d,
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lorenz" | "lorenz63" | "lorenz-63" => Ok(Self::Lorenz),
            "neuron" | "neuron3d" => Ok(Self::Neuron),
            "neuron2d" | "neuron_2d" => Ok(Self::Neuron2d),
            _ => Err(Error::UnknownSystem(s.to_string())),
        }
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lorenz => "lorenz",
            Self::Neuron => "neuron",
            Self::Neuron2d => "neuron2d",
        })
    }
}

/// A concrete continuous-time system with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum System<T> {
    Lorenz(LorenzParams<T>),
    Neuron {
        params: NeuronParams<T>,
        /// When set, `h` is frozen at this value and the state is `(V, n)`.
        fixed_h: Option<T>,
    },
}

impl<T: Scalar> System<T> {
    pub fn lorenz() -> Self {
        Self::Lorenz(LorenzParams::default())
    }

    pub fn neuron() -> Self {
        Self::Neuron {
            params: NeuronParams::default(),
            fixed_h: None,
        }
    }

    /// Planar reduction used for the bistability picture (`h = 0.05`).
    pub fn neuron_2d(h: T) -> Self {
        Self::Neuron {
            params: NeuronParams::default(),
            fixed_h: Some(h),
        }
    }

    /// Default-parameter instance of a named system.
    pub fn from_id(id: SystemId) -> Self {
        match id {
            SystemId::Lorenz => Self::lorenz(),
            SystemId::Neuron => Self::neuron(),
            SystemId::Neuron2d => Self::neuron_2d(T::lit(0.05)),
        }
    }

    pub fn id(&self) -> SystemId {
        match self {
            Self::Lorenz(_) => SystemId::Lorenz,
            Self::Neuron { fixed_h: None, .. } => SystemId::Neuron,
            Self::Neuron { .. } => SystemId::Neuron2d,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lorenz(_) => 3,
            Self::Neuron { fixed_h: None, .. } => 3,
            Self::Neuron { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Lorenz(p) => p.validate(),
            Self::Neuron { params, .. } => params.validate(),
        }
    }

    /// Evaluates the vector field at `x` into `out`.
    #[inline]
    pub fn vector_field_into(&self, x: &[T], out: &mut [T]) {
        match self {
            Self::Lorenz(p) => {
                let f = lorenz_vector_field([x[0], x[1], x[2]], p);
                out.copy_from_slice(&f);
            }
            Self::Neuron { params, fixed_h } => match fixed_h {
                None => {
                    let f = neuron_vector_field([x[0], x[1], x[2]], params);
                    out.copy_from_slice(&f);
                }
                Some(h) => {
                    out[0] = params.dv(x[0], x[1], *h);
                    out[1] = (params.n_inf(x[0]) - x[1]) / params.tau_n;
                }
            },
        }
    }

    pub fn vector_field(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        let mut out = vec![T::zero(); self.dim()];
        self.vector_field_into(x, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn jacobian_into(&self, x: &[T], out: &mut Mat<T>) {
        match self {
            Self::Lorenz(p) => lorenz::lorenz_jacobian(x, p, out),
            Self::Neuron { params, fixed_h } => neuron::neuron_jacobian(x, params, *fixed_h, out),
        }
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "system state",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Reads a named parameter (`sigma`, `rho`, `beta`, or a neuron symbol
    /// such as `gNMDA`; `h` addresses the frozen gate of the reduction).
    pub fn param(&self, name: &str) -> Result<T> {
        let v = match self {
            Self::Lorenz(p) => match name {
                "sigma" => Some(p.sigma),
                "rho" => Some(p.rho),
                "beta" => Some(p.beta),
                _ => None,
            },
            Self::Neuron { params, fixed_h } => match (name, fixed_h) {
                ("h", Some(h)) => Some(*h),
                _ => params.lookup(name),
            },
        };
        v.ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn set_param(&mut self, name: &str, value: T) -> Result<()> {
        let slot = match self {
            Self::Lorenz(p) => match name {
                "sigma" => Some(&mut p.sigma),
                "rho" => Some(&mut p.rho),
                "beta" => Some(&mut p.beta),
                _ => None,
            },
            Self::Neuron { params, fixed_h } => match (name, fixed_h) {
                ("h", Some(h)) => Some(h),
                _ => params.lookup_mut(name),
            },
        };
        match slot {
            Some(s) => {
                *s = value;
                Ok(())
            }
            None => Err(Error::UnknownParameter(name.to_string())),
        }
    }
}

/// Exact partial-derivative matrix of the vector field of `system` at `state`.
pub fn jacobian_analytic<T: Scalar>(system: &System<T>, state: &[T]) -> Result<Mat<T>> {
    system.check_dim(state)?;
    let mut out = Mat::zeros(system.dim(), system.dim());
    system.jacobian_into(state, &mut out);
    Ok(out)
}

/// Same as [`jacobian_analytic`], addressing the system by name with default
/// parameters.
pub fn jacobian_by_name<T: Scalar>(name: &str, state: &[T]) -> Result<Mat<T>> {
    let id: SystemId = name.parse()?;
    jacobian_analytic(&System::from_id(id), state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn lorenz_field_examples() {
        let p = LorenzParams::<f64>::default();
        assert_eq!(lorenz_vector_field([0.0, 0.0, 0.0], &p), [0.0, 0.0, 0.0]);
        let f = lorenz_vector_field([1.0, 1.0, 1.0], &p);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 26.0);
        assert!((f[2] - (-5.0 / 3.0)).abs() < 1e-15);
        let c = 72f64.sqrt();
        let f = lorenz_vector_field([c, c, 27.0], &p);
        for v in f {
            assert!(v.abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn lorenz_params_reject_nonpositive() {
        assert!(LorenzParams::new(10.0, 0.0, 1.0).is_err());
        assert!(LorenzParams::new(10.0, 28.0, 8.0 / 3.0).is_ok());
        assert_eq!(LorenzParams::<f64>::default().beta, 8.0 / 3.0);
    }

    #[test]
    fn lorenz_jacobian_at_origin() {
        let j = jacobian_analytic(&System::<f64>::lorenz(), &[0.0, 0.0, 0.0]).unwrap();
        let b = 8.0 / 3.0;
        let expected = Mat::from_rows(&[&[-10.0, 10.0, 0.0], &[28.0, -1.0, 0.0], &[0.0, 0.0, -b]]);
        assert_eq!(j, expected);
    }

    #[test]
    fn neuron_gating_examples() {
        let p = NeuronParams::<f64>::default();
        assert_eq!(p.m_inf(-20.0), 0.5);
        let v = -40.0;
        let f = neuron_vector_field([v, p.n_inf(v), 0.1], &p);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn unknown_names_are_errors() {
        assert_eq!(
            "duffing".parse::<SystemId>(),
            Err(Error::UnknownSystem("duffing".into()))
        );
        assert!(jacobian_by_name::<f64>("vanderpol", &[0.0, 0.0]).is_err());
        let mut s = System::<f64>::lorenz();
        assert!(s.set_param("gNMDA", 1.0).is_err());
        s.set_param("rho", 20.0).unwrap();
        assert_eq!(s.param("rho").unwrap(), 20.0);
    }

    #[test]
    fn reduction_exposes_frozen_gate() {
        let mut s = System::<f64>::neuron_2d(0.05);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.param("h").unwrap(), 0.05);
        s.set_param("h", 0.07).unwrap();
        assert_eq!(s.param("h").unwrap(), 0.07);
        assert!(jacobian_analytic(&s, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn neuron_jacobian_matches_finite_differences() {
        for sys in [System::<f64>::neuron(), System::neuron_2d(0.05)] {
            let states: Vec<Vec<f64>> = match sys.dim() {
                3 => vec![vec![-60.0, 0.1, 0.05], vec![-25.0, 0.4, 0.07], vec![-45.0, 0.0, 0.2]],
                _ => vec![vec![-60.0, 0.1], vec![-25.0, 0.4]],
            };
            for x in states {
                let j = jacobian_analytic(&sys, &x).unwrap();
                for c in 0..x.len() {
                    let h = 1e-6 * (1.0 + x[c].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[c] += h;
                    xm[c] -= h;
                    let fp = sys.vector_field(&xp).unwrap();
                    let fm = sys.vector_field(&xm).unwrap();
                    for r in 0..x.len() {
                        let fd = (fp[r] - fm[r]) / (2.0 * h);
                        assert!(close(j[(r, c)], fd, 1e-5), "({r},{c}) {} vs {fd}", j[(r, c)]);
                    }
                }
            }
        }
    }
}
