use std::collections::HashSet;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::{format_float, Trajectory};

/// Fewest scale levels accepted in an `ε` grid.
pub const MIN_EPS_LEVELS: usize = 6;

/// Fewest pairs required at a correlation-integral level.
pub const MIN_PAIRS_PER_LEVEL: u64 = 100;

/// A fractal-dimension estimate together with the scaling curve it was
/// fitted to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub dimension: f64,
    pub log_eps: Vec<f64>,
    /// `ln N_ε` for box counting, `ln C(ε)` for the correlation integral.
    pub log_counts: Vec<f64>,
    /// Levels used in the slope fit.
    pub fit_range: Range<usize>,
}

impl DimensionEstimate {
    /// Two-column CSV of the scaling curve.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("log_eps,log_count\n");
        for (e, c) in self.log_eps.iter().zip(&self.log_counts) {
            s.push_str(&format_float(*e));
            s.push(',');
            s.push_str(&format_float(*c));
            s.push('\n');
        }
        s
    }
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return invalid("geometric grid needs 0 < lo < hi and at least two levels");
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n).map(|i| lo * (ratio * i as f64).exp()).collect())
}

fn sorted_grid(eps_grid: &[f64]) -> Result<Vec<f64>> {
    if eps_grid.len() < MIN_EPS_LEVELS {
        return invalid(format!("eps grid needs at least {MIN_EPS_LEVELS} levels"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return invalid("eps values must be positive and finite");
    }
    let mut g = eps_grid.to_vec();
    g.sort_by(f64::total_cmp);
    let ratios: Vec<f64> = g.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    if ratios[0] <= 0.0 || ratios.iter().any(|r| (r - ratios[0]).abs() > 1e-6 * ratios[0]) {
        return invalid("eps grid must be geometric with distinct levels");
    }
    Ok(g)
}

/// Default fit region: every level but the smallest and the largest.
fn fit_region(n_levels: usize, fit: Option<Range<usize>>) -> Result<Range<usize>> {
    let r = fit.unwrap_or(1..n_levels - 1);
    if r.end > n_levels || r.len() < 2 {
        return invalid(format!("fit range {r:?} must hold at least two of {n_levels} levels"));
    }
    Ok(r)
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn check_points<T: Scalar>(x: &Trajectory<T>) -> Result<()> {
    let first = x.row(0);
    if x.rows().all(|r| r == first) {
        return Err(Error::ConstantSeries("point set"));
    }
    Ok(())
}

/// Box-counting dimension: the negative slope of `ln N_ε` against `ln ε`,
/// with occupied boxes found by hashing integer grid coordinates anchored
/// at the lower corner of the bounding box.
pub fn box_counting_dim<T: Scalar>(
    x: &Trajectory<T>,
    eps_grid: &[f64],
    fit: Option<Range<usize>>,
) -> Result<DimensionEstimate> {
    let grid = sorted_grid(eps_grid)?;
    check_points(x)?;
    let lower: Vec<f64> = x.bounding_box().iter().map(|(lo, _)| lo.as_f64()).collect();
    let counts: Vec<usize> = grid
        .par_iter()
        .map(|&eps| {
            let mut boxes = HashSet::with_capacity(x.len());
            for row in x.rows() {
                let key: Vec<i64> = row
                    .iter()
                    .zip(&lower)
                    .map(|(v, lo)| ((v.as_f64() - lo) / eps).floor() as i64)
                    .collect();
                boxes.insert(key);
            }
            boxes.len()
        })
        .collect();
    let log_eps: Vec<f64> = grid.iter().map(|e| e.ln()).collect();
    let log_counts: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let fit_range = fit_region(grid.len(), fit)?;
    let dimension = -slope(&log_eps[fit_range.clone()], &log_counts[fit_range.clone()]);
    Ok(DimensionEstimate {
        dimension,
        log_eps,
        log_counts,
        fit_range,
    })
}

/// Pairs `(i, j)` with `j − i > theiler` whose distance is below each grid
/// level.
fn pair_counts<T: Scalar>(x: &Trajectory<T>, grid_sq: &[f64], theiler: usize) -> (Vec<u64>, u64) {
    let n = x.len();
    let levels = grid_sq.len();
    let max_sq = grid_sq[levels - 1];
    let hist = (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; levels],
            |mut h, i| {
                let xi = x.row(i);
                for j in (i + theiler + 1)..n {
                    let d: f64 = xi
                        .iter()
                        .zip(x.row(j))
                        .map(|(a, b)| {
                            let d = a.as_f64() - b.as_f64();
                            d * d
                        })
                        .sum();
                    if d < max_sq {
                        // First level whose radius exceeds the distance.
                        let k = grid_sq.partition_point(|&e| e <= d);
                        h[k] += 1;
                    }
                }
                h
            },
        )
        .reduce(
            || vec![0u64; levels],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut cumulative = hist;
    for k in 1..levels {
        cumulative[k] += cumulative[k - 1];
    }
    let total = if n > theiler + 1 {
        let m = (n - theiler - 1) as u64;
        m * (m + 1) / 2
    } else {
        0
    };
    (cumulative, total)
}

/// Correlation dimension: slope of `ln C(ε)` against `ln ε`, where `C(ε)`
/// is the fraction of pairs closer than `ε` among pairs more than
/// `theiler` samples apart. Levels with fewer than
/// [`MIN_PAIRS_PER_LEVEL`] pairs are dropped from the small end of the
/// grid; at least [`MIN_EPS_LEVELS`] must remain.
pub fn correlation_dim<T: Scalar>(
    x: &Trajectory<T>,
    eps_grid: &[f64],
    theiler: usize,
    fit: Option<Range<usize>>,
) -> Result<DimensionEstimate> {
    let grid = sorted_grid(eps_grid)?;
    check_points(x)?;
    let grid_sq: Vec<f64> = grid.iter().map(|e| e * e).collect();
    let (counts, total) = pair_counts(x, &grid_sq, theiler);
    let first = counts.iter().position(|&c| c >= MIN_PAIRS_PER_LEVEL).unwrap_or(counts.len());
    if grid.len() - first < MIN_EPS_LEVELS {
        return Err(Error::TooShort {
            context: "eps levels with enough neighbour pairs",
            needed: MIN_EPS_LEVELS,
            got: grid.len() - first,
        });
    }
    let log_eps: Vec<f64> = grid[first..].iter().map(|e| e.ln()).collect();
    let log_counts: Vec<f64> = counts[first..]
        .iter()
        .map(|&c| (c as f64 / total as f64).ln())
        .collect();
    let fit_range = fit_region(log_eps.len(), fit)?;
    let dimension = slope(&log_eps[fit_range.clone()], &log_counts[fit_range.clone()]);
    Ok(DimensionEstimate {
        dimension,
        log_eps,
        log_counts,
        fit_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        let g = geometric_grid(0.01, 1.0, 7).unwrap();
        assert!((g[6] - 1.0).abs() < 1e-12 && (g[0] - 0.01).abs() < 1e-15);
        assert!(sorted_grid(&g[..5]).is_err());
        assert!(sorted_grid(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).is_err());
        let mut rev = g.clone();
        rev.reverse();
        assert_eq!(sorted_grid(&rev).unwrap(), g);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let x = Trajectory::from_rows(&vec![vec![1.0, 2.0]; 50], 1.0).unwrap();
        let g = geometric_grid(0.01, 1.0, 8).unwrap();
        assert!(matches!(box_counting_dim(&x, &g, None), Err(Error::ConstantSeries(_))));
    }

    #[test]
    fn pair_counts_match_brute_force() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let x = Trajectory::from_rows(&rows, 1.0).unwrap();
        let grid = [0.1, 0.3, 0.9];
        let grid_sq: Vec<f64> = grid.iter().map(|e| e * e).collect();
        let (c, total) = pair_counts(&x, &grid_sq, 3);
        let mut brute = [0u64; 3];
        let mut pairs = 0;
        for i in 0..40 {
            for j in (i + 4)..40 {
                pairs += 1;
                let d = ((rows[i][0] - rows[j][0]).powi(2) + (rows[i][1] - rows[j][1]).powi(2)).sqrt();
                for (k, e) in grid.iter().enumerate() {
                    if d < *e {
                        brute[k] += 1;
                    }
                }
            }
        }
        assert_eq!(c, brute);
        assert_eq!(total, pairs);
    }
}
