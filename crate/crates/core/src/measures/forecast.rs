use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Pointwise error used by [`vpt`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastError {
    /// Root mean square over channels of the error divided by the per-channel
    /// standard deviation of the truth.
    #[default]
    Nrmse,
    /// Mean over channels of `2|x − x̂| / (|x| + |x̂|)`, as a fraction in
    /// `[0, 2]`; a channel where both values are 0 contributes 0.
    Smape,
}

fn check_same_shape<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>) -> Result<()> {
    if x.n_channels() != xhat.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "forecast channels",
            expected: x.n_channels(),
            got: xhat.n_channels(),
        });
    }
    if x.len() != xhat.len() {
        return Err(Error::DimensionMismatch {
            context: "forecast length",
            expected: x.len(),
            got: xhat.len(),
        });
    }
    Ok(())
}

/// Error at every time step under `kind`.
pub fn pointwise_errors<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>, kind: ForecastError) -> Result<Vec<f64>> {
    check_same_shape(x, xhat)?;
    let n = x.n_channels() as f64;
    let (_, std) = x.channel_stats();
    let std: Vec<f64> = std.iter().map(|s| s.as_f64()).collect();
    if kind == ForecastError::Nrmse && std.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::ConstantSeries("forecast truth channel"));
    }
    Ok(x
        .rows()
        .zip(xhat.rows())
        .map(|(a, b)| match kind {
            ForecastError::Nrmse => {
                let s: f64 = a
                    .iter()
                    .zip(b)
                    .zip(&std)
                    .map(|((u, v), s)| ((u.as_f64() - v.as_f64()) / s).powi(2))
                    .sum();
                (s / n).sqrt()
            }
            ForecastError::Smape => {
                let s: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(u, v)| {
                        let (u, v) = (u.as_f64(), v.as_f64());
                        let d = u.abs() + v.abs();
                        if d == 0.0 {
                            0.0
                        } else {
                            2.0 * (u - v).abs() / d
                        }
                    })
                    .sum();
                s / n
            }
        })
        .collect())
}

/// Valid prediction time in steps: the number of leading steps whose error
/// stays below `epsilon`. Later returns below the threshold do not count.
pub fn vpt<T: Scalar>(x: &Trajectory<T>, xhat: &Trajectory<T>, epsilon: f64, kind: ForecastError) -> Result<usize> {
    if !(epsilon > 0.0) {
        return invalid("VPT epsilon must be positive");
    }
    let errors = pointwise_errors(x, xhat, kind)?;
    Ok(errors.iter().position(|&e| !(e < epsilon)).unwrap_or(errors.len()))
}

/// Mean absolute scaled error: per channel, the mean absolute forecast error
/// divided by the mean absolute in-sample seasonal-naive error
/// `|x_t − x_{t−s}|`, averaged over channels.
pub fn mase<T: Scalar>(
    truth: &Trajectory<T>,
    forecast: &Trajectory<T>,
    insample: &Trajectory<T>,
    seasonality: usize,
) -> Result<f64> {
    check_same_shape(truth, forecast)?;
    if insample.n_channels() != truth.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "in-sample channels",
            expected: truth.n_channels(),
            got: insample.n_channels(),
        });
    }
    if seasonality == 0 {
        return invalid("seasonality must be positive");
    }
    if insample.len() <= seasonality {
        return Err(Error::TooShort {
            context: "MASE in-sample series",
            needed: seasonality + 1,
            got: insample.len(),
        });
    }
    let mut total = 0.0;
    for c in 0..truth.n_channels() {
        let s = insample.column(c);
        let naive = (seasonality..s.len())
            .map(|t| (s[t] - s[t - seasonality]).abs().as_f64())
            .sum::<f64>()
            / (s.len() - seasonality) as f64;
        if !(naive > 0.0) {
            return Err(Error::ConstantSeries("MASE in-sample channel"));
        }
        let err = truth
            .column(c)
            .iter()
            .zip(forecast.column(c))
            .map(|(a, b)| (*a - b).abs().as_f64())
            .sum::<f64>()
            / truth.len() as f64;
        total += err / naive;
    }
    Ok(total / truth.n_channels() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> Trajectory<f64> {
        Trajectory::from_series(v, 1.0).unwrap()
    }

    #[test]
    fn vpt_conventions() {
        let x = series(&[0.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
        assert_eq!(vpt(&x, &x, 0.3, ForecastError::Nrmse).unwrap(), 6);
        let far = series(&[5.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
        assert_eq!(vpt(&x, &far, 0.3, ForecastError::Nrmse).unwrap(), 0);
        // Re-entry below the threshold after the first crossing is ignored.
        let reentry = series(&[0.0, 1.0, 3.0, -1.0, 0.0, 1.0]);
        assert_eq!(vpt(&x, &reentry, 0.3, ForecastError::Nrmse).unwrap(), 2);
        assert!(vpt(&x, &x, 0.0, ForecastError::Smape).is_err());
    }

    #[test]
    fn mase_examples() {
        let ins = series(&[1.0, 2.0, 3.0]);
        let m = mase(&series(&[4.0]), &series(&[3.0]), &ins, 1).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(mase(&series(&[4.0]), &series(&[4.0]), &ins, 1).unwrap(), 0.0);
        assert!(matches!(
            mase(&series(&[4.0]), &series(&[3.0]), &series(&[2.0, 2.0, 2.0]), 1),
            Err(Error::ConstantSeries(_))
        ));
        assert!(mase(&series(&[4.0]), &series(&[3.0]), &ins, 3).is_err());
    }
}
