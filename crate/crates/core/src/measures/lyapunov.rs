use serde::{Deserialize, Serialize};

use crate::dynsys::{System, DIVERGENCE_BOUND};
use crate::error::{invalid, Error, Result};
use crate::linalg::{matmul_into, qr_in_place, Mat, QrWork};
use crate::models::Model;
use crate::scalar::Scalar;

/// Fewest steps accepted by [`lyapunov_spectrum`].
pub const MIN_LYAPUNOV_STEPS: usize = 1000;

/// Lyapunov exponents, largest first, per unit time for flows and per step
/// for maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    pub exponents: Vec<f64>,
    pub n_steps_used: usize,
    pub renorm_interval: usize,
}

impl LyapunovSpectrum {
    pub fn max_exponent(&self) -> f64 {
        self.exponents[0]
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// A map that advances a state by one step and supplies the Jacobian of
/// that step.
pub trait TangentMap<T: Scalar> {
    fn dim(&self) -> usize;

    /// Time per step: the integration step for flows, 1 for maps.
    fn step_time(&self) -> f64;

    /// Writes the Jacobian of the step at the current `state` into `jac`,
    /// then advances `state`.
    fn step_with_jacobian(&mut self, state: &mut [T], jac: &mut Mat<T>);

    fn step(&mut self, state: &mut [T]);

    /// Advances `state` by `n` steps, failing if the orbit leaves the
    /// divergence bound.
    fn advance(&mut self, state: &mut [T], n: usize) -> Result<()> {
        for step in 0..n {
            self.step(state);
            check_state(state, step + 1)?;
        }
        Ok(())
    }
}

fn check_state<T: Scalar>(state: &[T], step: usize) -> Result<()> {
    let bound = T::lit(DIVERGENCE_BOUND);
    if state.iter().any(|v| !v.is_finite() || v.abs() > bound) {
        return Err(Error::Diverged { step });
    }
    Ok(())
}

/// Tangent map of one classical RK4 step of a continuous-time system,
/// obtained by differentiating every stage.
#[derive(Clone, Debug)]
pub struct FlowTangent<T> {
    system: System<T>,
    dt: T,
    k: [Vec<T>; 4],
    dk: [Mat<T>; 4],
    df: Mat<T>,
    tmp: Vec<T>,
    dtmp: Mat<T>,
}

impl<T: Scalar> FlowTangent<T> {
    pub fn new(system: System<T>, dt: T) -> Result<Self> {
        system.validate()?;
        if !(dt > T::zero()) {
            return invalid("dt must be positive");
        }
        let n = system.dim();
        Ok(Self {
            system,
            dt,
            k: std::array::from_fn(|_| vec![T::zero(); n]),
            dk: std::array::from_fn(|_| Mat::zeros(n, n)),
            df: Mat::zeros(n, n),
            tmp: vec![T::zero(); n],
            dtmp: Mat::zeros(n, n),
        })
    }

    /// Stage `i` at `x + c·k_{i-1}`; also its derivative when `jacobian`.
    fn stage(&mut self, x: &[T], i: usize, c: T, jacobian: bool) {
        let n = x.len();
        for j in 0..n {
            self.tmp[j] = if i == 0 { x[j] } else { x[j] + c * self.k[i - 1][j] };
        }
        self.system.vector_field_into(&self.tmp, &mut self.k[i]);
        if !jacobian {
            return;
        }
        self.system.jacobian_into(&self.tmp, &mut self.df);
        if i == 0 {
            self.dk[0].as_mut_slice().copy_from_slice(self.df.as_slice());
            return;
        }
        // d(stage input)/dx = I + c·dk_{i-1}
        for r in 0..n {
            for col in 0..n {
                let id = if r == col { T::one() } else { T::zero() };
                self.dtmp[(r, col)] = id + c * self.dk[i - 1][(r, col)];
            }
        }
        matmul_into(&self.df, &self.dtmp, &mut self.dk[i]);
    }

    fn full_step(&mut self, state: &mut [T], jac: Option<&mut Mat<T>>) {
        let h = self.dt;
        let half = h * T::lit(0.5);
        let want = jac.is_some();
        self.stage(state, 0, T::zero(), want);
        self.stage(state, 1, half, want);
        self.stage(state, 2, half, want);
        self.stage(state, 3, h, want);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        if let Some(jac) = jac {
            let n = state.len();
            for r in 0..n {
                for c in 0..n {
                    let s = self.dk[0][(r, c)] + two * (self.dk[1][(r, c)] + self.dk[2][(r, c)]) + self.dk[3][(r, c)];
                    jac[(r, c)] = sixth * s + if r == c { T::one() } else { T::zero() };
                }
            }
        }
        for (j, x) in state.iter_mut().enumerate() {
            *x += sixth * (self.k[0][j] + two * (self.k[1][j] + self.k[2][j]) + self.k[3][j]);
        }
    }
}

impl<T: Scalar> TangentMap<T> for FlowTangent<T> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn step_time(&self) -> f64 {
        self.dt.as_f64()
    }

    fn step_with_jacobian(&mut self, state: &mut [T], jac: &mut Mat<T>) {
        self.full_step(state, Some(jac));
    }

    fn step(&mut self, state: &mut [T]) {
        self.full_step(state, None);
    }
}

/// Tangent map of a trained model's latent map (closed loop for reservoirs).
#[derive(Clone, Debug)]
pub struct ModelTangent<'a, T> {
    model: &'a Model<T>,
    next: Vec<T>,
}

impl<'a, T: Scalar> ModelTangent<'a, T> {
    pub fn new(model: &'a Model<T>) -> Self {
        Self {
            model,
            next: vec![T::zero(); model.latent_dim()],
        }
    }
}

impl<T: Scalar> TangentMap<T> for ModelTangent<'_, T> {
    fn dim(&self) -> usize {
        self.model.latent_dim()
    }

    fn step_time(&self) -> f64 {
        1.0
    }

    fn step_with_jacobian(&mut self, state: &mut [T], jac: &mut Mat<T>) {
        self.model.jacobian_into(state, jac);
        self.step(state);
    }

    fn step(&mut self, state: &mut [T]) {
        self.model.step_into(state, &mut self.next);
        state.copy_from_slice(&self.next);
    }
}

/// Lyapunov spectrum along the orbit from `z0` by tangent propagation with
/// QR re-orthonormalization every `renorm_interval` steps.
pub fn lyapunov_spectrum<T: Scalar, P: TangentMap<T> + ?Sized>(
    provider: &mut P,
    z0: &[T],
    n_steps: usize,
    renorm_interval: usize,
) -> Result<LyapunovSpectrum> {
    let m = provider.dim();
    if z0.len() != m {
        return Err(Error::DimensionMismatch {
            context: "Lyapunov initial state",
            expected: m,
            got: z0.len(),
        });
    }
    if n_steps < MIN_LYAPUNOV_STEPS {
        return Err(Error::TooShort {
            context: "Lyapunov orbit",
            needed: MIN_LYAPUNOV_STEPS,
            got: n_steps,
        });
    }
    if renorm_interval == 0 {
        return invalid("renorm_interval must be at least 1");
    }
    let mut state = z0.to_vec();
    let mut q = Mat::<T>::identity(m);
    let mut jac = Mat::zeros(m, m);
    let mut next = Mat::zeros(m, m);
    let mut r_diag = vec![T::zero(); m];
    let mut work = QrWork::default();
    let mut log_sums = vec![0.0f64; m];
    for step in 1..=n_steps {
        provider.step_with_jacobian(&mut state, &mut jac);
        check_state(&state, step)?;
        matmul_into(&jac, &q, &mut next);
        std::mem::swap(&mut q, &mut next);
        if step % renorm_interval == 0 || step == n_steps {
            if !q.is_finite() {
                return Err(Error::NonFinite("tangent vectors".into()));
            }
            qr_in_place(&mut q, &mut r_diag, &mut work);
            for (acc, &r) in log_sums.iter_mut().zip(&r_diag) {
                let r = r.as_f64();
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::TangentCollapse { step });
                }
                *acc += r.ln();
            }
        }
    }
    let total_time = n_steps as f64 * provider.step_time();
    let mut exponents: Vec<f64> = log_sums.iter().map(|s| s / total_time).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum {
        exponents,
        n_steps_used: n_steps,
        renorm_interval,
    })
}

/// Kaplan-Yorke dimension `j + Σ_{i≤j} λ_i / |λ_{j+1}|`, where `j` is the
/// largest index with a non-negative partial sum.
pub fn kaplan_yorke(spectrum: &LyapunovSpectrum) -> Result<f64> {
    kaplan_yorke_dimension(&spectrum.exponents)
}

/// [`kaplan_yorke`] on a raw exponent list sorted in descending order.
pub fn kaplan_yorke_dimension(exponents: &[f64]) -> Result<f64> {
    if exponents.is_empty() {
        return invalid("empty Lyapunov spectrum");
    }
    if exponents.windows(2).any(|w| w[0] < w[1]) {
        return invalid("Lyapunov spectrum must be sorted in descending order");
    }
    if exponents[0] < 0.0 {
        return Ok(0.0);
    }
    let mut partial = 0.0;
    for (j, &l) in exponents.iter().enumerate() {
        if partial + l < 0.0 {
            return Ok(j as f64 + partial / l.abs());
        }
        partial += l;
    }
    Ok(exponents.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(Mat<f64>);

    impl TangentMap<f64> for Constant {
        fn dim(&self) -> usize {
            self.0.rows()
        }
        fn step_time(&self) -> f64 {
            1.0
        }
        fn step_with_jacobian(&mut self, _: &mut [f64], jac: &mut Mat<f64>) {
            jac.as_mut_slice().copy_from_slice(self.0.as_slice());
        }
        fn step(&mut self, _: &mut [f64]) {}
    }

    #[test]
    fn constant_diagonal_map() {
        let mut p = Constant(Mat::from_diag(&[0.5, 2.0]));
        let s = lyapunov_spectrum(&mut p, &[0.0, 0.0], 2000, 10).unwrap();
        assert!((s.exponents[0] - 2f64.ln()).abs() < 1e-12);
        assert!((s.exponents[1] + 2f64.ln()).abs() < 1e-12);
        let mut id = Constant(Mat::identity(3));
        let s = lyapunov_spectrum(&mut id, &[0.0; 3], 1000, 7).unwrap();
        assert!(s.exponents.iter().all(|&l| l.abs() < 1e-15));
    }

    #[test]
    fn collapse_and_short_orbits_are_errors() {
        let mut p = Constant(Mat::from_diag(&[1.0, 0.0]));
        assert!(matches!(
            lyapunov_spectrum(&mut p, &[0.0, 0.0], 1000, 10),
            Err(Error::TangentCollapse { step: 10 })
        ));
        assert!(matches!(
            lyapunov_spectrum(&mut p, &[0.0, 0.0], 999, 10),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn kaplan_yorke_examples() {
        assert_eq!(kaplan_yorke_dimension(&[-1.0, -2.0]).unwrap(), 0.0);
        assert_eq!(kaplan_yorke_dimension(&[0.0, -1.0]).unwrap(), 1.0);
        let d = kaplan_yorke_dimension(&[0.906, 0.0, -14.57]).unwrap();
        assert!((d - (2.0 + 0.906 / 14.57)).abs() < 1e-12);
        assert_eq!(kaplan_yorke_dimension(&[1.0, 0.5]).unwrap(), 2.0);
        assert!(kaplan_yorke_dimension(&[]).is_err());
        assert!(kaplan_yorke_dimension(&[-1.0, 0.0]).is_err());
    }

    #[test]
    fn flow_tangent_matches_finite_differences() {
        let sys = System::<f64>::lorenz();
        let mut ft = FlowTangent::new(sys, 0.01).unwrap();
        let x0 = [1.0, 2.0, 20.0];
        let mut jac = Mat::zeros(3, 3);
        let mut x = x0;
        ft.step_with_jacobian(&mut x, &mut jac);
        let h = 1e-6;
        for c in 0..3 {
            let mut p = x0;
            p[c] += h;
            ft.step(&mut p);
            let mut m = x0;
            m[c] -= h;
            ft.step(&mut m);
            for r in 0..3 {
                let fd = (p[r] - m[r]) / (2.0 * h);
                assert!((fd - jac[(r, c)]).abs() < 1e-7, "{r},{c}");
            }
        }
    }
}
