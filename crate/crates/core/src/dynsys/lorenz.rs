use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Lorenz-63 convection model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams<T> {
    pub sigma: T,
    pub rho: T,
    pub beta: T,
}

impl<T: Scalar> LorenzParams<T> {
    pub fn new(sigma: T, rho: T, beta: T) -> Result<Self> {
        let p = Self { sigma, rho, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("rho", self.rho), ("beta", self.beta)] {
            if !(v > T::zero()) || !v.is_finite() {
                return invalid(format!("Lorenz parameter {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Divergence of the vector field, `-(σ + 1 + β)`, identical at every state.
    pub fn divergence(&self) -> T {
        -(self.sigma + T::one() + self.beta)
    }

    /// The two non-trivial equilibria `(±√(β(ρ-1)), ±√(β(ρ-1)), ρ-1)`.
    pub fn nontrivial_equilibria(&self) -> Option<[[T; 3]; 2]> {
        let r = self.rho - T::one();
        if r <= T::zero() {
            return None;
        }
        let c = (self.beta * r).sqrt();
        Some([[c, c, r], [-c, -c, r]])
    }
}

impl<T: Scalar> Default for LorenzParams<T> {
    fn default() -> Self {
        Self {
            sigma: T::lit(10.0),
            rho: T::lit(28.0),
            beta: T::lit(8.0) / T::lit(3.0),
        }
    }
}

pub fn lorenz_vector_field<T: Scalar>(state: [T; 3], p: &LorenzParams<T>) -> [T; 3] {
    let [x, y, z] = state;
    [p.sigma * (y - x), x * (p.rho - z) - y, x * y - p.beta * z]
}

pub(crate) fn lorenz_jacobian<T: Scalar>(state: &[T], p: &LorenzParams<T>, out: &mut Mat<T>) {
    let (x, y, z) = (state[0], state[1], state[2]);
    out[(0, 0)] = -p.sigma;
    out[(0, 1)] = p.sigma;
    out[(0, 2)] = T::zero();
    out[(1, 0)] = p.rho - z;
    out[(1, 1)] = -T::one();
    out[(1, 2)] = -x;
    out[(2, 0)] = y;
    out[(2, 1)] = x;
    out[(2, 2)] = -p.beta;
}
