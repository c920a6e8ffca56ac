use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::trajectory::Trajectory;

/// Highest dimension the histogram estimator accepts.
pub const MAX_BINNED_DIM: usize = 5;

/// Fewest rows either trajectory must have for a state-space divergence.
pub const MIN_STSP_ROWS: usize = 1000;

/// Relative padding of the data bounding box on each side.
const BOX_PADDING: f64 = 0.05;

/// Count substituted for a generated-side bin that is empty where the data
/// bin is occupied.
const PSEUDO_COUNT: f64 = 1.0;

fn check_pair<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>, min_rows: usize) -> Result<()> {
    if x.n_channels() != xhat.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "generated trajectory channels",
            expected: x.n_channels(),
            got: xhat.n_channels(),
        });
    }
    for t in [x, xhat] {
        if t.len() < min_rows {
            return Err(Error::TooShort {
                context: "state-space divergence trajectory",
                needed: min_rows,
                got: t.len(),
            });
        }
    }
    Ok(())
}

/// `Σ p log(p/q)` over bins where `p > 0`, in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "distribution length",
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if !(qi > 0.0) {
                return Ok(f64::INFINITY);
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl)
}

fn bin_counts<T: Scalar>(x: &Trajectory<T>, lower: &[f64], width: &[f64], m_bins: usize) -> HashMap<usize, u64> {
    let mut counts = HashMap::new();
    'rows: for row in x.rows() {
        let mut key = 0usize;
        for ((v, lo), w) in row.iter().zip(lower).zip(width) {
            let k = ((v.as_f64() - lo) / w).floor();
            if !(k >= 0.0 && k < m_bins as f64) {
                continue 'rows;
            }
            key = key * m_bins + k as usize;
        }
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Histogram estimate of `KL(p_data ‖ p_generated)` on `m_bins` bins per
/// dimension over the data bounding box padded by 5% on each side.
///
/// Generated points outside the box are dropped but still count towards the
/// generated normalization. Generated bins that are empty where the data bin
/// is occupied receive a pseudo-count of 1 before normalization.
pub fn dstsp_binned<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>, m_bins: usize) -> Result<f64> {
    check_pair(x, xhat, MIN_STSP_ROWS)?;
    let n = x.n_channels();
    if n > MAX_BINNED_DIM {
        return Err(Error::TooManyDimensions { dims: n });
    }
    if m_bins == 0 {
        return invalid("m_bins must be positive");
    }
    if (m_bins as f64).powi(n as i32) > usize::MAX as f64 / 2.0 {
        return invalid("binning grid too large");
    }
    let bbox = x.bounding_box();
    let mut lower = Vec::with_capacity(n);
    let mut width = Vec::with_capacity(n);
    for (lo, hi) in bbox {
        let (lo, hi) = (lo.as_f64(), hi.as_f64());
        let span = hi - lo;
        let pad = if span > 0.0 { BOX_PADDING * span } else { BOX_PADDING.max(BOX_PADDING * lo.abs()) };
        lower.push(lo - pad);
        width.push((span + 2.0 * pad) / m_bins as f64);
    }
    let p_counts = bin_counts(x, &lower, &width, m_bins);
    let q_counts = bin_counts(xhat, &lower, &width, m_bins);
    let mut keys: Vec<usize> = p_counts.keys().copied().collect();
    keys.sort_unstable();
    let added = keys.iter().filter(|k| !q_counts.contains_key(k)).count() as f64 * PSEUDO_COUNT;
    let p_total = x.len() as f64;
    let q_total = xhat.len() as f64 + added;
    let mut p = Vec::with_capacity(keys.len());
    let mut q = Vec::with_capacity(keys.len());
    for k in &keys {
        p.push(p_counts[k] as f64 / p_total);
        q.push(q_counts.get(k).map_or(PSEUDO_COUNT, |&c| c as f64) / q_total);
    }
    kl_divergence(&p, &q)
}

/// How the mixture KL is approximated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GmmMode {
    /// Average log-density ratio over `n_samples` draws from the data
    /// mixture.
    MonteCarlo { n_samples: usize, seed: u64 },
    /// Closed-form variational approximation from pairwise component KLs.
    Variational,
}

/// Scott-style bandwidth `T^(−1/(N+4))` for standardized data.
pub fn default_gmm_sigma(n_rows: usize, n_dims: usize) -> f64 {
    (n_rows as f64).powf(-1.0 / (n_dims as f64 + 4.0))
}

fn to_rows<T: Scalar>(x: &Trajectory<T>) -> Vec<Vec<f64>> {
    x.rows().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `ln` of an equal-weight isotropic mixture density at `s`, dropping the
/// normalization constant shared by both mixtures.
fn log_mixture(centres: &[Vec<f64>], s: &[f64], inv_two_var: f64) -> f64 {
    let e: Vec<f64> = centres.iter().map(|c| -sq(c, s) * inv_two_var).collect();
    log_sum_exp(&e) - (centres.len() as f64).ln()
}

/// `KL(p_data ‖ p_generated)` between Gaussian mixtures with one isotropic
/// component of standard deviation `sigma` at every trajectory point.
pub fn dstsp_gmm<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>, sigma: f64, mode: GmmMode) -> Result<f64> {
    check_pair(x, xhat, 1)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid("GMM sigma must be positive");
    }
    let p = to_rows(x);
    let q = to_rows(xhat);
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    match mode {
        GmmMode::MonteCarlo { n_samples, seed } => {
            if n_samples == 0 {
                return invalid("n_samples must be positive");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<Vec<f64>> = (0..n_samples)
                .map(|_| {
                    let c = &p[rng.random_range(0..p.len())];
                    c.iter()
                        .map(|&m| {
                            let z: f64 = rng.sample(StandardNormal);
                            m + sigma * z
                        })
                        .collect()
                })
                .collect();
            let ratios: Vec<f64> = draws
                .par_iter()
                .map(|s| log_mixture(&p, s, inv_two_var) - log_mixture(&q, s, inv_two_var))
                .collect();
            Ok(ratios.iter().sum::<f64>() / n_samples as f64)
        }
        GmmMode::Variational => {
            // Component KLs reduce to scaled squared distances for equal
            // isotropic covariances.
            let terms: Vec<f64> = p
                .par_iter()
                .map(|a| {
                    let own: Vec<f64> = p.iter().map(|b| -sq(a, b) * inv_two_var).collect();
                    let other: Vec<f64> = q.iter().map(|b| -sq(a, b) * inv_two_var).collect();
                    (log_sum_exp(&own) - (p.len() as f64).ln()) - (log_sum_exp(&other) - (q.len() as f64).ln())
                })
                .collect();
            Ok(terms.iter().sum::<f64>() / p.len() as f64)
        }
    }
}
