use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, spd_condition_number, Mat};
use crate::models::Reservoir;
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Normal matrices with a larger 2-norm condition number are rejected.
pub const MAX_RIDGE_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit<T> {
    pub w_out: Mat<T>,
    /// Reservoir state after the last training input, the natural start of
    /// a closed-loop continuation.
    pub final_state: Vec<T>,
    /// Mean squared one-step readout error over the fitted samples.
    pub train_mse: f64,
}

/// Reservoir states `R` (`M × K`, one column per kept step) and targets `X`
/// (`N × K`) from open-loop driving with `u_t = x_{t-1}` from `r_0 = 0`,
/// dropping the first `washout` steps.
pub fn ridge_design<T: Scalar>(
    rc: &Reservoir<T>,
    data: &Trajectory<T>,
    washout: usize,
) -> Result<(Mat<T>, Mat<T>, Vec<T>)> {
    let m = rc.reservoir_dim();
    let n = rc.input_dim();
    if data.n_channels() != n {
        return Err(Error::DimensionMismatch {
            context: "reservoir training channels",
            expected: n,
            got: data.n_channels(),
        });
    }
    if data.len() <= washout + m {
        return Err(Error::TooShort {
            context: "reservoir training data",
            needed: washout + m + 1,
            got: data.len(),
        });
    }
    let x = data.samples();
    let inputs = Mat::from_row_major(
        x.rows() - 1,
        n,
        x.as_slice()[..(x.rows() - 1) * n].to_vec(),
    )?;
    // Row t of `states` is r_{t+1}, driven by x_t.
    let states = rc.drive(&vec![T::zero(); m], &inputs)?;
    let k = states.rows() - washout;
    let r = Mat::from_fn(m, k, |i, j| states[(washout + j, i)]);
    let targets = Mat::from_fn(n, k, |i, j| x[(washout + j + 1, i)]);
    let last = states.row(states.rows() - 1).to_vec();
    Ok((r, targets, last))
}

/// Gradient of `Σ_t ||x_t − W r_t||² + λ||W||²_F` with respect to `W`.
pub fn ridge_loss_gradient<T: Scalar>(w_out: &Mat<T>, r: &Mat<T>, x: &Mat<T>, lambda: T) -> Mat<T> {
    let resid = x.sub(&w_out.matmul(r));
    resid
        .matmul(&r.transpose())
        .scaled(T::lit(-2.0))
        .add(&w_out.scaled(T::lit(2.0) * lambda))
}

/// Fits the readout in closed form, `W_out = X Rᵀ (R Rᵀ + λI)⁻¹`, through a
/// Cholesky solve of the normal equations, and stores it in `rc`.
pub fn train_rc_ridge<T: Scalar>(
    rc: &mut Reservoir<T>,
    data: &Trajectory<T>,
    ridge_lambda: T,
    washout: usize,
) -> Result<RidgeFit<T>> {
    if !(ridge_lambda >= T::zero()) {
        return Err(Error::InvalidArgument("ridge_lambda must be non-negative".into()));
    }
    let (r, x, final_state) = ridge_design(rc, data, washout)?;
    let m = rc.reservoir_dim();
    let mut gram = r.matmul(&r.transpose());
    for i in 0..m {
        gram[(i, i)] += ridge_lambda;
    }
    let condition = spd_condition_number(&gram);
    if !(condition <= MAX_RIDGE_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let l = cholesky(&gram)?;
    // (R Rᵀ + λI) W_outᵀ = R Xᵀ
    let w_out = cholesky_solve(&l, &r.matmul(&x.transpose())).transpose();
    if !w_out.is_finite() {
        return Err(Error::NonFinite("ridge readout".into()));
    }
    let resid = x.sub(&w_out.matmul(&r));
    let train_mse = resid
        .as_slice()
        .iter()
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        / resid.as_slice().len() as f64;
    rc.w_out = w_out.clone();
    Ok(RidgeFit {
        w_out,
        final_state,
        train_mse,
    })
}
