use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Leaky echo-state reservoir `r' = α r + (1-α) tanh(W r + W_in u + b)` with
/// linear readout `x̂ = W_out r`. Only `w_out` is trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reservoir<T> {
    pub alpha: T,
    pub w: Mat<T>,
    /// `M × N`.
    pub w_in: Mat<T>,
    pub b: Vec<T>,
    /// `N × M`.
    pub w_out: Mat<T>,
    pub spectral_radius_target: T,
}

impl<T: Scalar> Reservoir<T> {
    pub fn new(
        alpha: T,
        w: Mat<T>,
        w_in: Mat<T>,
        b: Vec<T>,
        w_out: Mat<T>,
        spectral_radius_target: T,
    ) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return invalid(format!("leak alpha must lie in [0, 1], got {alpha}"));
        }
        if !(spectral_radius_target > T::zero()) {
            return invalid("spectral radius target must be positive");
        }
        let m = w.rows();
        let n = w_in.cols();
        if m == 0 || n == 0 {
            return invalid("reservoir needs at least one unit and one input");
        }
        for (context, expected, got) in [
            ("reservoir W cols", m, w.cols()),
            ("reservoir W_in rows", m, w_in.rows()),
            ("reservoir b", m, b.len()),
            ("reservoir W_out rows", n, w_out.rows()),
            ("reservoir W_out cols", m, w_out.cols()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    got,
                });
            }
        }
        Ok(Self {
            alpha,
            w,
            w_in,
            b,
            w_out,
            spectral_radius_target,
        })
    }

    pub fn reservoir_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.cols()
    }

    fn drive_term(&self, r: &[T], u: &[T]) -> Vec<T> {
        let mut pre = self.b.clone();
        for (i, p) in pre.iter_mut().enumerate() {
            let wr: T = self.w.row(i).iter().zip(r).map(|(&a, &b)| a * b).sum();
            let wu: T = self.w_in.row(i).iter().zip(u).map(|(&a, &b)| a * b).sum();
            *p += wr + wu;
        }
        pre
    }

    /// One driven update with external input `u`.
    pub fn step_into(&self, r: &[T], u: &[T], out: &mut [T]) {
        let pre = self.drive_term(r, u);
        let keep = T::one() - self.alpha;
        for i in 0..r.len() {
            out[i] = self.alpha * r[i] + keep * pre[i].tanh();
        }
    }

    pub fn step(&self, r: &[T], u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); r.len()];
        self.step_into(r, u, &mut out);
        out
    }

    pub fn readout(&self, r: &[T]) -> Vec<T> {
        self.w_out.matvec(r)
    }

    /// Autonomous update with the readout fed back as input.
    pub fn closed_loop_step_into(&self, r: &[T], out: &mut [T]) {
        let u = self.readout(r);
        self.step_into(r, &u, out);
    }

    /// `∂r'/∂r` with the input held fixed: `α I + (1-α) diag(1 - tanh²) W`.
    pub fn jacobian_into(&self, r: &[T], u: &[T], out: &mut Mat<T>) {
        self.jacobian_with(r, u, &self.w, out);
    }

    /// Jacobian of the closed-loop map, where the input depends on `r`
    /// through the readout: the recurrent matrix becomes `W + W_in W_out`.
    pub fn closed_loop_jacobian_into(&self, r: &[T], out: &mut Mat<T>) {
        let u = self.readout(r);
        let eff = self.w.add(&self.w_in.matmul(&self.w_out));
        self.jacobian_with(r, &u, &eff, out);
    }

    fn jacobian_with(&self, r: &[T], u: &[T], rec: &Mat<T>, out: &mut Mat<T>) {
        let pre = self.drive_term(r, u);
        let keep = T::one() - self.alpha;
        let m = r.len();
        for i in 0..m {
            let th = pre[i].tanh();
            let d = keep * (T::one() - th * th);
            for j in 0..m {
                out[(i, j)] = d * rec[(i, j)];
            }
            out[(i, i)] += self.alpha;
        }
    }

    /// Reservoir states under open-loop driving, `r_t = step(r_{t-1}, u_t)`,
    /// starting from `r0`. Row `t` of the result is `r_{t+1}`.
    pub fn drive(&self, r0: &[T], inputs: &Mat<T>) -> Result<Mat<T>> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "reservoir inputs",
                expected: self.input_dim(),
                got: inputs.cols(),
            });
        }
        if r0.len() != self.reservoir_dim() {
            return Err(Error::DimensionMismatch {
                context: "reservoir state",
                expected: self.reservoir_dim(),
                got: r0.len(),
            });
        }
        let m = self.reservoir_dim();
        let mut states = Mat::zeros(inputs.rows(), m);
        let mut r = r0.to_vec();
        let mut next = vec![T::zero(); m];
        for t in 0..inputs.rows() {
            self.step_into(&r, inputs.row(t), &mut next);
            std::mem::swap(&mut r, &mut next);
            states.row_mut(t).copy_from_slice(&r);
        }
        Ok(states)
    }
}
