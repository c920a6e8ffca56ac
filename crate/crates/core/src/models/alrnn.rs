use serde::{Deserialize, Serialize};

use super::Trainable;
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Almost-linear RNN: `z' = A z + W Φ*(z) + h`, where `Φ*` applies a ReLU to
/// the last `relu_units` coordinates and passes the others through.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlRnn<T> {
    /// Diagonal of `A`.
    pub a: Vec<T>,
    pub w: Mat<T>,
    pub h: Vec<T>,
    pub relu_units: usize,
}

impl<T: Scalar> AlRnn<T> {
    pub fn new(a: Vec<T>, w: Mat<T>, h: Vec<T>, relu_units: usize) -> Result<Self> {
        let m = a.len();
        if m == 0 {
            return invalid("AL-RNN needs at least one latent unit");
        }
        if w.shape() != (m, m) {
            return Err(Error::DimensionMismatch {
                context: "AL-RNN W",
                expected: m,
                got: if w.rows() != m { w.rows() } else { w.cols() },
            });
        }
        if h.len() != m {
            return Err(Error::DimensionMismatch {
                context: "AL-RNN h",
                expected: m,
                got: h.len(),
            });
        }
        if relu_units > m {
            return invalid(format!("relu_units {relu_units} exceeds latent dimension {m}"));
        }
        Ok(Self { a, w, h, relu_units })
    }

    pub fn latent_dim(&self) -> usize {
        self.a.len()
    }

    /// Index of the first ReLU unit.
    #[inline]
    pub fn first_relu(&self) -> usize {
        self.a.len() - self.relu_units
    }

    #[inline]
    fn phi(&self, j: usize, v: T) -> T {
        if j >= self.first_relu() {
            v.max(T::zero())
        } else {
            v
        }
    }

    #[inline]
    fn dphi(&self, j: usize, v: T) -> T {
        if j < self.first_relu() || v > T::zero() {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn step_into(&self, z: &[T], out: &mut [T]) {
        let m = self.latent_dim();
        for i in 0..m {
            let row = self.w.row(i);
            let mut acc = self.a[i] * z[i] + self.h[i];
            for j in 0..m {
                acc += row[j] * self.phi(j, z[j]);
            }
            out[i] = acc;
        }
    }

    pub fn step(&self, z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.latent_dim()];
        self.step_into(z, &mut out);
        out
    }

    /// `A + W·D(z)`.
    pub fn jacobian_into(&self, z: &[T], out: &mut Mat<T>) {
        let m = self.latent_dim();
        for i in 0..m {
            let w = self.w.row(i);
            let row = out.row_mut(i);
            for j in 0..m {
                row[j] = w[j] * self.dphi(j, z[j]);
            }
            row[i] += self.a[i];
        }
    }

    /// Sign pattern of the ReLU units, which identifies the linear region.
    pub fn activation_pattern(&self, z: &[T]) -> Vec<bool> {
        z[self.first_relu()..].iter().map(|&v| v > T::zero()).collect()
    }
}

impl<T: Scalar> Trainable<T> for AlRnn<T> {
    fn latent_dim(&self) -> usize {
        self.a.len()
    }

    fn n_params(&self) -> usize {
        let m = self.a.len();
        m * m + 2 * m
    }

    fn params(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.a);
        p.extend_from_slice(self.w.as_slice());
        p.extend_from_slice(&self.h);
        p
    }

    fn set_params(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "AL-RNN parameter vector",
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let m = self.a.len();
        self.a.copy_from_slice(&p[..m]);
        self.w.as_mut_slice().copy_from_slice(&p[m..m + m * m]);
        self.h.copy_from_slice(&p[m + m * m..]);
        Ok(())
    }

    fn step_into(&self, z: &[T], out: &mut [T]) {
        AlRnn::step_into(self, z, out)
    }

    fn jacobian_into(&self, z: &[T], out: &mut Mat<T>) {
        AlRnn::jacobian_into(self, z, out)
    }

    fn vjp(&self, z: &[T], g: &[T], grad_params: &mut [T], grad_state: &mut [T]) {
        let m = self.a.len();
        let (ga, rest) = grad_params.split_at_mut(m);
        let (gw, gh) = rest.split_at_mut(m * m);
        for i in 0..m {
            ga[i] += g[i] * z[i];
            gh[i] += g[i];
            let row = &mut gw[i * m..(i + 1) * m];
            for j in 0..m {
                row[j] += g[i] * self.phi(j, z[j]);
            }
        }
        for j in 0..m {
            let mut acc = T::zero();
            for i in 0..m {
                acc += self.w[(i, j)] * g[i];
            }
            grad_state[j] = self.a[j] * g[j] + self.dphi(j, z[j]) * acc;
        }
    }
}
