//! Delay-coordinate reconstruction of a scalar series, with lag selection
//! from the autocorrelation function and dimension selection by false
//! nearest neighbours.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::scalar::{sq_dist, Scalar};
use crate::trajectory::Trajectory;

/// Embedding dimension and lag (in samples).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub dimension: usize,
    pub lag: usize,
}

impl EmbeddingSpec {
    pub fn new(dimension: usize, lag: usize) -> Result<Self> {
        if dimension == 0 || lag == 0 {
            return invalid("embedding dimension and lag must be at least 1");
        }
        Ok(Self { dimension, lag })
    }

    /// Input rows consumed before the first complete delay vector.
    pub fn span(&self) -> usize {
        (self.dimension - 1) * self.lag
    }
}

/// Delay embedding of a single-channel series: row `t` of the output is
/// `(y_t, y_{t-lag}, …, y_{t-(m-1)lag})`, newest value first. The first
/// output row corresponds to input index `(m-1)·lag`.
pub fn delay_embed<T: Scalar>(series: &Trajectory<T>, spec: EmbeddingSpec) -> Result<Trajectory<T>> {
    if series.n_channels() != 1 {
        return Err(Error::DimensionMismatch {
            context: "delay_embed channels",
            expected: 1,
            got: series.n_channels(),
        });
    }
    EmbeddingSpec::new(spec.dimension, spec.lag)?;
    let y = series.column(0);
    let span = spec.span();
    if y.len() <= span {
        return Err(Error::TooShort {
            context: "delay_embed",
            needed: span + 1,
            got: y.len(),
        });
    }
    let rows = y.len() - span;
    let m = spec.dimension;
    let samples = Mat::from_fn(rows, m, |r, c| y[r + span - c * spec.lag]);
    Trajectory::new(samples, series.dt(), series.time(span))
}

/// Sample autocorrelation `r(0..=max_lag)` (biased estimator, `r(0) = 1`).
pub fn autocorrelation<T: Scalar>(series: &[T], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::TooShort {
            context: "autocorrelation",
            needed: 2,
            got: n,
        });
    }
    let mean = series.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v.as_f64() - mean).collect();
    let var: f64 = centered.iter().map(|v| v * v).sum();
    if var <= f64::EPSILON * n as f64 * mean.abs().max(1.0).powi(2) {
        return Err(Error::ConstantSeries("autocorrelation"));
    }
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = centered
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = buf[0].re;
    Ok((0..=max_lag.min(n - 1)).map(|k| buf[k].re / scale).collect())
}

/// Chooses a delay from the first trough of the autocorrelation function.
///
/// If the lag-1 autocorrelation is already within the white-noise band
/// `2/√T`, the series carries no usable correlation and the lag is 1.
/// Otherwise the first local minimum below `T/2` is returned, falling back
/// to the first zero crossing and finally to `T/10`.
pub fn select_lag<T: Scalar>(series: &Trajectory<T>) -> Result<usize> {
    if series.n_channels() != 1 {
        return Err(Error::DimensionMismatch {
            context: "select_lag channels",
            expected: 1,
            got: series.n_channels(),
        });
    }
    let n = series.len();
    if n < 50 {
        return Err(Error::TooShort {
            context: "select_lag",
            needed: 50,
            got: n,
        });
    }
    let half = n / 2;
    let r = autocorrelation(&series.column(0), half + 1)?;
    if r[1].abs() < 2.0 / (n as f64).sqrt() {
        return Ok(1);
    }
    if let Some(k) = (1..half).find(|&k| r[k] < r[k - 1] && r[k] <= r[k + 1]) {
        return Ok(k);
    }
    if let Some(k) = (1..=half).find(|&k| r[k] <= 0.0) {
        return Ok(k);
    }
    Ok((n / 10).max(1))
}

/// Fraction of false nearest neighbours when going from dimension `m` to
/// `m + 1` (Kennel distance-ratio criterion), with temporal neighbours
/// `|i - j| <= theiler` excluded from the search.
pub fn false_neighbor_fraction<T: Scalar>(
    y: &[T],
    lag: usize,
    m: usize,
    ratio_threshold: T,
    theiler: usize,
) -> Result<f64> {
    let span = m * lag;
    if y.len() <= span + 1 {
        return Err(Error::TooShort {
            context: "false_neighbor_fraction",
            needed: span + 2,
            got: y.len(),
        });
    }
    let n = y.len() - span;
    // Points of the (m+1)-dimensional embedding; the first m coordinates form
    // the m-dimensional embedding of the same time index.
    let pts: Vec<Vec<T>> = (0..n)
        .map(|r| (0..=m).map(|c| y[r + span - c * lag]).collect())
        .collect();
    let mut false_count = 0usize;
    let mut valid = 0usize;
    for i in 0..n {
        let mut best = T::infinity();
        let mut best_j = usize::MAX;
        for j in 0..n {
            if i.abs_diff(j) <= theiler {
                continue;
            }
            let d = sq_dist(&pts[i][..m], &pts[j][..m]);
            if d < best {
                best = d;
                best_j = j;
            }
        }
        if best_j == usize::MAX {
            continue;
        }
        valid += 1;
        let extra = (pts[i][m] - pts[best_j][m]).abs();
        let r_m = best.sqrt();
        let is_false = if r_m > T::zero() {
            extra / r_m > ratio_threshold
        } else {
            extra > T::zero()
        };
        if is_false {
            false_count += 1;
        }
    }
    if valid == 0 {
        return invalid("Theiler window excludes every neighbour");
    }
    Ok(false_count as f64 / valid as f64)
}

/// Fraction of false neighbours below which a dimension is accepted.
pub const FNN_ACCEPT_FRACTION: f64 = 0.01;

/// Smallest `m ≤ m_max` whose false-neighbour fraction is below 1%, or
/// `m_max` if none qualifies. Uses a Theiler exclusion of `lag` samples.
pub fn false_nearest_neighbors<T: Scalar>(
    series: &Trajectory<T>,
    lag: usize,
    m_max: usize,
    ratio_threshold: T,
) -> Result<usize> {
    if series.n_channels() != 1 {
        return Err(Error::DimensionMismatch {
            context: "false_nearest_neighbors channels",
            expected: 1,
            got: series.n_channels(),
        });
    }
    if lag == 0 || m_max == 0 {
        return invalid("lag and m_max must be at least 1");
    }
    let needed = m_max * lag + 11;
    if series.len() < needed {
        return Err(Error::TooShort {
            context: "false_nearest_neighbors",
            needed,
            got: series.len(),
        });
    }
    let y = series.column(0);
    for m in 1..=m_max {
        if false_neighbor_fraction(&y, lag, m, ratio_threshold, lag)? < FNN_ACCEPT_FRACTION {
            return Ok(m);
        }
    }
    Ok(m_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn series(v: &[f64]) -> Trajectory<f64> {
        Trajectory::from_series(v, 1.0).unwrap()
    }

    #[test]
    fn embed_examples() {
        let s = series(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let e = delay_embed(&s, EmbeddingSpec::new(3, 1).unwrap()).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.row(0), &[3.0, 2.0, 1.0]);
        assert_eq!(e.row(2), &[5.0, 4.0, 3.0]);
        assert_eq!(e.t0(), 2.0);

        let e = delay_embed(&s, EmbeddingSpec::new(2, 2).unwrap()).unwrap();
        let rows: Vec<Vec<f64>> = e.rows().map(<[f64]>::to_vec).collect();
        assert_eq!(rows, vec![vec![3.0, 1.0], vec![4.0, 2.0], vec![5.0, 3.0]]);

        let e = delay_embed(&s, EmbeddingSpec::new(1, 4).unwrap()).unwrap();
        assert_eq!(e.column(0), s.column(0));
    }

    #[test]
    fn embed_errors() {
        let s = series(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            delay_embed(&s, EmbeddingSpec { dimension: 4, lag: 1 }),
            Err(Error::TooShort { .. })
        ));
        let two = Trajectory::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], 1.0).unwrap();
        assert!(delay_embed(&two, EmbeddingSpec { dimension: 1, lag: 1 }).is_err());
        assert!(EmbeddingSpec::new(0, 1).is_err());
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 7919) % 113) as f64).collect();
        let r = autocorrelation(&v, 10).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let c0: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
        for k in 0..=10 {
            let ck: f64 = (0..v.len() - k).map(|t| (v[t] - mean) * (v[t + k] - mean)).sum();
            assert!((r[k] - ck / c0).abs() < 1e-12);
        }
    }

    #[test]
    fn lag_of_cosine_is_half_period() {
        let v: Vec<f64> = (0..5000)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 100.0).cos())
            .collect();
        assert_eq!(select_lag(&series(&v)).unwrap(), 50);
    }

    #[test]
    fn lag_of_white_noise_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert_eq!(select_lag(&series(&v)).unwrap(), 1);
    }

    #[test]
    fn lag_of_constant_is_error() {
        assert_eq!(
            select_lag(&series(&vec![3.0; 100])),
            Err(Error::ConstantSeries("autocorrelation"))
        );
        assert!(matches!(
            select_lag(&series(&[1.0, 2.0])),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn fnn_on_sine_selects_two() {
        // Incommensurate period so no two samples coincide exactly.
        let v: Vec<f64> = (0..1500).map(|i| (i as f64 * 0.1237).sin()).collect();
        let s = series(&v);
        let lag = select_lag(&s).unwrap();
        assert_eq!(false_nearest_neighbors(&s, lag, 5, 10.0).unwrap(), 2);
    }

    #[test]
    fn fnn_degenerate_search_space() {
        let v: Vec<f64> = (0..200).map(|i| (i as f64 * 0.3).sin()).collect();
        assert_eq!(false_nearest_neighbors(&series(&v), 3, 1, 10.0).unwrap(), 1);
        assert!(false_nearest_neighbors(&series(&v[..20]), 3, 4, 10.0).is_err());
    }
}
