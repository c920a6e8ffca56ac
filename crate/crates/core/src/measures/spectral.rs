use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Fewest samples per channel for a spectral comparison.
pub const MIN_SPECTRAL_ROWS: usize = 256;

/// Gaussian kernels are truncated at this many standard deviations.
const KERNEL_RADIUS_SIGMAS: f64 = 4.0;

/// Which spectra are compared and how.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralVariant {
    /// Hellinger distance between smoothed, normalized power spectra.
    #[default]
    Hellinger,
    /// Hellinger distance between smoothed log power spectra, shifted to be
    /// non-negative and normalized.
    LogHellinger,
    /// `W1` between smoothed, normalized power spectra treated as
    /// distributions over frequency in cycles per sample.
    Wasserstein,
}

/// Periodogram `|F x|²` of the mean-removed series at frequencies
/// `0..=T/2` bins.
pub fn power_spectrum(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::TooShort {
            context: "power spectrum series",
            needed: 2,
            got: n,
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    if !(var > 0.0) {
        return Err(Error::ConstantSeries("spectral channel"));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect())
}

/// Convolution with a Gaussian of standard deviation `sigma` bins,
/// truncated at the ends. `sigma = 0` leaves the input unchanged.
pub fn gaussian_smooth(values: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return invalid("smoothing sigma must be non-negative");
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let radius = (KERNEL_RADIUS_SIGMAS * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();
    let n = values.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            (lo..=hi).map(|j| values[j] * kernel[i.abs_diff(j)]).sum::<f64>() / norm
        })
        .collect())
}

fn normalized(values: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ConstantSeries("spectral channel"));
    }
    Ok(values.into_iter().map(|v| v / total).collect())
}

/// `(1/√2) ‖√f − √g‖₂` for normalized non-negative vectors.
pub fn hellinger_distance(f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            context: "spectrum length",
            expected: f.len(),
            got: g.len(),
        });
    }
    let s: f64 = f.iter().zip(g).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((0.5 * s).sqrt().min(1.0))
}

/// Smoothed and normalized spectrum of every channel, ready for comparison
/// under `variant`.
pub fn smoothed_spectra<T: Scalar>(x: &Trajectory<T>, sigma_s: f64, variant: SpectralVariant) -> Result<Vec<Vec<f64>>> {
    (0..x.n_channels())
        .map(|c| {
            let series: Vec<f64> = x.column(c).iter().map(|v| v.as_f64()).collect();
            let smooth = gaussian_smooth(&power_spectrum(&series)?, sigma_s)?;
            match variant {
                SpectralVariant::LogHellinger => {
                    let max = smooth.iter().copied().fold(0.0, f64::max);
                    let floor = 1e-12 * max;
                    let logs: Vec<f64> = smooth.iter().map(|v| (v + floor).ln()).collect();
                    let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
                    normalized(logs.into_iter().map(|l| l - min).collect())
                }
                _ => normalized(smooth),
            }
        })
        .collect()
}

fn spectral_w1(f: &[f64], g: &[f64], n_rows: usize) -> f64 {
    let bin = 1.0 / n_rows as f64;
    let (mut cf, mut cg, mut acc) = (0.0, 0.0, 0.0);
    for (a, b) in f.iter().zip(g) {
        cf += a;
        cg += b;
        acc += (cf - cg).abs() * bin;
    }
    acc
}

/// Mean over channels of the distance between smoothed power spectra. The
/// longer trajectory is truncated to the length of the shorter one so both
/// share a frequency grid.
pub fn spectral_distance<T: Scalar>(
    x: &Trajectory<T>,
    xhat: &Trajectory<T>,
    sigma_s: f64,
    variant: SpectralVariant,
) -> Result<f64> {
    if x.n_channels() != xhat.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "generated trajectory channels",
            expected: x.n_channels(),
            got: xhat.n_channels(),
        });
    }
    let len = x.len().min(xhat.len());
    if len < MIN_SPECTRAL_ROWS {
        return Err(Error::TooShort {
            context: "spectral comparison",
            needed: MIN_SPECTRAL_ROWS,
            got: len,
        });
    }
    let f = smoothed_spectra(&x.slice(0..len)?, sigma_s, variant)?;
    let g = smoothed_spectra(&xhat.slice(0..len)?, sigma_s, variant)?;
    let mut total = 0.0;
    for (fc, gc) in f.iter().zip(&g) {
        total += match variant {
            SpectralVariant::Wasserstein => spectral_w1(fc, gc, len),
            _ => hellinger_distance(fc, gc)?,
        };
    }
    Ok(total / f.len() as f64)
}

/// Power-spectrum Hellinger distance `D_H ∈ [0, 1]`.
pub fn hellinger_spectral<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>, sigma_s: f64) -> Result<f64> {
    spectral_distance(x, xhat, sigma_s, SpectralVariant::Hellinger)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bin_hellinger() {
        let h = hellinger_distance(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((h - (1.0 - 0.5f64.sqrt()).sqrt()).abs() < 1e-15);
        assert!((h - 0.5412).abs() < 1e-4);
    }

    #[test]
    fn periodogram_of_pure_tone() {
        let n = 512;
        let s: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 8.0 * i as f64 / n as f64).sin()).collect();
        let p = power_spectrum(&s).unwrap();
        assert_eq!(p.len(), n / 2 + 1);
        let peak = p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, 8);
        // Parseval: the two-sided spectrum carries n · Σ x².
        let energy: f64 = s.iter().map(|v| v * v).sum();
        let two_sided: f64 = p[1..n / 2].iter().sum::<f64>() * 2.0 + p[0] + p[n / 2];
        assert!((two_sided - n as f64 * energy).abs() < 1e-6 * two_sided);
        assert!(matches!(power_spectrum(&[1.0; 8]), Err(Error::ConstantSeries(_))));
    }

    #[test]
    fn smoothing_preserves_interior_mass() {
        let mut v = vec![0.0; 101];
        v[50] = 1.0;
        let s = gaussian_smooth(&v, 3.0).unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s[47] - s[53]).abs() < 1e-15);
        assert_eq!(gaussian_smooth(&v, 0.0).unwrap(), v);
    }
}
