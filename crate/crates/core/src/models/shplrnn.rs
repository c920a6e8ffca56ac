use serde::{Deserialize, Serialize};

use super::Trainable;
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Shallow PLRNN: `z' = A z + W1 relu(W2 z + h2) + h1` with `H` hidden units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShPlrnn<T> {
    pub a: Vec<T>,
    /// `M × H`.
    pub w1: Mat<T>,
    /// `H × M`.
    pub w2: Mat<T>,
    pub h1: Vec<T>,
    pub h2: Vec<T>,
}

impl<T: Scalar> ShPlrnn<T> {
    pub fn new(a: Vec<T>, w1: Mat<T>, w2: Mat<T>, h1: Vec<T>, h2: Vec<T>) -> Result<Self> {
        let m = a.len();
        let hdim = h2.len();
        if m == 0 || hdim == 0 {
            return invalid("shPLRNN needs at least one latent and one hidden unit");
        }
        let check = |context, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context,
                    expected,
                    got,
                })
            }
        };
        check("shPLRNN W1 rows", m, w1.rows())?;
        check("shPLRNN W1 cols", hdim, w1.cols())?;
        check("shPLRNN W2 rows", hdim, w2.rows())?;
        check("shPLRNN W2 cols", m, w2.cols())?;
        check("shPLRNN h1", m, h1.len())?;
        Ok(Self { a, w1, w2, h1, h2 })
    }

    pub fn latent_dim(&self) -> usize {
        self.a.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.h2.len()
    }

    fn preactivation(&self, z: &[T]) -> Vec<T> {
        let mut pre = self.h2.clone();
        for (k, p) in pre.iter_mut().enumerate() {
            *p += self.w2.row(k).iter().zip(z).map(|(&w, &v)| w * v).sum::<T>();
        }
        pre
    }

    pub fn step_into(&self, z: &[T], out: &mut [T]) {
        let act: Vec<T> = self
            .preactivation(z)
            .into_iter()
            .map(|v| v.max(T::zero()))
            .collect();
        for i in 0..self.latent_dim() {
            let row = self.w1.row(i);
            out[i] = self.a[i] * z[i]
                + self.h1[i]
                + row.iter().zip(&act).map(|(&w, &v)| w * v).sum::<T>();
        }
    }

    pub fn step(&self, z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.latent_dim()];
        self.step_into(z, &mut out);
        out
    }

    /// `A + W1·D(W2 z + h2)·W2`.
    pub fn jacobian_into(&self, z: &[T], out: &mut Mat<T>) {
        let pre = self.preactivation(z);
        let m = self.latent_dim();
        for i in 0..m {
            for j in 0..m {
                let mut acc = T::zero();
                for (k, &p) in pre.iter().enumerate() {
                    if p > T::zero() {
                        acc += self.w1[(i, k)] * self.w2[(k, j)];
                    }
                }
                out[(i, j)] = acc;
            }
            out[(i, i)] += self.a[i];
        }
    }
}

impl<T: Scalar> Trainable<T> for ShPlrnn<T> {
    fn latent_dim(&self) -> usize {
        self.a.len()
    }

    fn n_params(&self) -> usize {
        let (m, h) = (self.a.len(), self.h2.len());
        2 * m * h + 2 * m + h
    }

    fn params(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.a);
        p.extend_from_slice(self.w1.as_slice());
        p.extend_from_slice(self.w2.as_slice());
        p.extend_from_slice(&self.h1);
        p.extend_from_slice(&self.h2);
        p
    }

    fn set_params(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "shPLRNN parameter vector",
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let (m, h) = (self.a.len(), self.h2.len());
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &p[at..at + n];
            at += n;
            s
        };
        self.a.copy_from_slice(take(m));
        self.w1.as_mut_slice().copy_from_slice(take(m * h));
        self.w2.as_mut_slice().copy_from_slice(take(m * h));
        self.h1.copy_from_slice(take(m));
        self.h2.copy_from_slice(take(h));
        Ok(())
    }

    fn step_into(&self, z: &[T], out: &mut [T]) {
        ShPlrnn::step_into(self, z, out)
    }

    fn jacobian_into(&self, z: &[T], out: &mut Mat<T>) {
        ShPlrnn::jacobian_into(self, z, out)
    }

    fn vjp(&self, z: &[T], g: &[T], grad_params: &mut [T], grad_state: &mut [T]) {
        let (m, hd) = (self.a.len(), self.h2.len());
        let pre = self.preactivation(z);
        let (ga, rest) = grad_params.split_at_mut(m);
        let (gw1, rest) = rest.split_at_mut(m * hd);
        let (gw2, rest) = rest.split_at_mut(m * hd);
        let (gh1, gh2) = rest.split_at_mut(m);
        for i in 0..m {
            ga[i] += g[i] * z[i];
            gh1[i] += g[i];
            for k in 0..hd {
                gw1[i * hd + k] += g[i] * pre[k].max(T::zero());
            }
        }
        // Cotangent on the hidden pre-activation.
        let mut q = vec![T::zero(); hd];
        for k in 0..hd {
            if pre[k] > T::zero() {
                q[k] = (0..m).map(|i| self.w1[(i, k)] * g[i]).sum();
            }
        }
        for k in 0..hd {
            gh2[k] += q[k];
            for j in 0..m {
                gw2[k * m + j] += q[k] * z[j];
            }
        }
        for j in 0..m {
            grad_state[j] = self.a[j] * g[j] + (0..hd).map(|k| self.w2[(k, j)] * q[k]).sum::<T>();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_hand_evaluation() {
        let m = ShPlrnn::new(
            vec![0.0],
            Mat::from_rows(&[&[2.0]]),
            Mat::from_rows(&[&[1.0]]),
            vec![0.0],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(m.step(&[3.0]), vec![6.0]);
        assert_eq!(m.step(&[-3.0]), vec![0.0]);
    }

    #[test]
    fn dead_hidden_layer_returns_bias() {
        let m = ShPlrnn::new(
            vec![0.8, 0.6],
            Mat::from_rows(&[&[1.0, -2.0, 0.5], &[0.3, 0.1, -1.0]]),
            Mat::from_rows(&[&[1.0, 1.0], &[-1.0, 2.0], &[0.5, 0.5]]),
            vec![0.25, -0.75],
            vec![0.0, -1.0, -0.5],
        )
        .unwrap();
        assert_eq!(m.step(&[0.0, 0.0]), vec![0.25, -0.75]);
    }

    #[test]
    fn saturated_hidden_layer_is_affine() {
        let w1 = Mat::from_rows(&[&[1.0, -2.0], &[0.3, 0.1]]);
        let w2 = Mat::from_rows(&[&[1.0, 1.0], &[-1.0, 2.0]]);
        let m = ShPlrnn::new(vec![0.8, 0.6], w1.clone(), w2.clone(), vec![0.1, 0.2], vec![100.0, 100.0])
            .unwrap();
        for z in [[0.5, -1.0], [3.0, 2.0], [-4.0, 1.0]] {
            let pre: Vec<f64> = w2.matvec(&z).iter().map(|v| v + 100.0).collect();
            let lin = w1.matvec(&pre);
            let expected = [0.8 * z[0] + lin[0] + 0.1, 0.6 * z[1] + lin[1] + 0.2];
            let got = m.step(&z);
            assert!((got[0] - expected[0]).abs() < 1e-12 && (got[1] - expected[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let r = ShPlrnn::new(
            vec![0.5; 2],
            Mat::<f64>::zeros(2, 3),
            Mat::zeros(2, 2),
            vec![0.0; 2],
            vec![0.0; 3],
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
