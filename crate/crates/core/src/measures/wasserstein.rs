use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Exact `W1` between two empirical distributions on the line: the integral
/// of `|F⁻¹(q) − G⁻¹(q)|` over `q ∈ [0, 1]`, evaluated piecewise on the
/// merged quantile breakpoints of both samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return invalid("W1 needs non-empty samples");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    if a.iter().chain(&b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("W1 samples".into()));
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(sorted_w1(&a, &b))
}

fn sorted_w1(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    // Walk the breakpoints i/n and j/m in integer units of 1/(n·m).
    let (mut i, mut j) = (0usize, 0usize);
    let mut q = 0usize;
    let total = n * m;
    let mut acc = 0.0;
    while q < total {
        let next_a = (i + 1) * m;
        let next_b = (j + 1) * n;
        let next = next_a.min(next_b);
        acc += (next - q) as f64 * (a[i] - b[j]).abs();
        q = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    acc / total as f64
}

/// Sliced `W1`: the mean 1D `W1` between projections onto `n_projections`
/// directions drawn uniformly on the unit sphere. Direction `l` comes from
/// its own seeded stream, so the result does not depend on evaluation order.
pub fn sliced_w1<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>, n_projections: usize, seed: u64) -> Result<f64> {
    if x.n_channels() != xhat.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "generated trajectory channels",
            expected: x.n_channels(),
            got: xhat.n_channels(),
        });
    }
    if x.is_empty() || xhat.is_empty() {
        return invalid("sliced W1 needs non-empty trajectories");
    }
    if n_projections == 0 {
        return invalid("n_projections must be positive");
    }
    let n = x.n_channels();
    let project = |t: &Trajectory<T>, dir: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = t
            .rows()
            .map(|r| r.iter().zip(dir).map(|(a, d)| a.as_f64() * d).sum())
            .collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let per_slice: Vec<f64> = (0..n_projections)
        .into_par_iter()
        .map(|l| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l as u64);
            let dir = loop {
                let d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    break d.into_iter().map(|v| v / norm).collect::<Vec<f64>>();
                }
            };
            sorted_w1(&project(x, &dir), &project(xhat, &dir))
        })
        .collect();
    let w = per_slice.iter().sum::<f64>() / n_projections as f64;
    if !w.is_finite() {
        return Err(Error::NonFinite("sliced W1".into()));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_examples() {
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[3.0], &[0.5]).unwrap(), 2.5);
        // Unequal sizes: {0} against {0, 1} moves half the mass by 1.
        assert!((wasserstein_1d(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn one_channel_slicing_is_exact() {
        let x = Trajectory::from_series(&[0.0], 1.0).unwrap();
        let y = Trajectory::from_series(&[2.5], 1.0).unwrap();
        assert!((sliced_w1(&x, &y, 16, 3).unwrap() - 2.5).abs() < 1e-15);
    }
}
