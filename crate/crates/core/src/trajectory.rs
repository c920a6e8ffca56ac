//! Uniformly sampled multivariate time series.

use std::io::Write;
use std::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// `T × N` samples taken every `dt` time units starting at `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    samples: Mat<T>,
    dt: T,
    t0: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(samples: Mat<T>, dt: T, t0: T) -> Result<Self> {
        if samples.rows() == 0 || samples.cols() == 0 {
            return invalid("trajectory needs at least one row and one column");
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return invalid(format!("sample interval must be positive, got {dt}"));
        }
        if !t0.is_finite() {
            return Err(Error::NonFinite("trajectory start time".into()));
        }
        if let Some(pos) = samples.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = samples.cols();
            return Err(Error::NonFinite(format!(
                "trajectory sample at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { samples, dt, t0 })
    }

    /// Builds a trajectory from rows of equal length.
    pub fn from_rows(rows: &[Vec<T>], dt: T) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "trajectory rows",
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(Mat::from_row_major(rows.len(), n, data)?, dt, T::zero())
    }

    /// Single-channel trajectory.
    pub fn from_series(series: &[T], dt: T) -> Result<Self> {
        Self::new(
            Mat::from_row_major(series.len(), 1, series.to_vec())?,
            dt,
            T::zero(),
        )
    }

    #[inline]
    /// Same samples on a different time axis.
    pub fn with_time_base(self, dt: T, t0: T) -> Result<Self> {
        Self::new(self.samples, dt, t0)
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    #[inline]
    pub fn n_channels(&self) -> usize {
        self.samples.cols()
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.dt
    }

    #[inline]
    pub fn t0(&self) -> T {
        self.t0
    }

    #[inline]
    pub fn samples(&self) -> &Mat<T> {
        &self.samples
    }

    pub fn into_samples(self) -> Mat<T> {
        self.samples
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        self.samples.row(i)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.len()).map(move |i| self.samples.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.samples.column(j)
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + self.dt * T::from_count(i)
    }

    pub fn last(&self) -> &[T] {
        self.samples.row(self.len() - 1)
    }

    /// Contiguous sub-range of rows; start time shifts accordingly.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return invalid(format!(
                "row range {:?} outside trajectory of length {}",
                range,
                self.len()
            ));
        }
        let n = self.n_channels();
        let data = self.samples.as_slice()[range.start * n..range.end * n].to_vec();
        Self::new(
            Mat::from_row_major(range.end - range.start, n, data)?,
            self.dt,
            self.time(range.start),
        )
    }

    /// Keeps every `stride`-th row.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return invalid("stride must be positive");
        }
        let n = self.n_channels();
        let mut data = Vec::new();
        for i in (0..self.len()).step_by(stride) {
            data.extend_from_slice(self.row(i));
        }
        Self::new(
            Mat::from_row_major(data.len() / n, n, data)?,
            self.dt * T::from_count(stride),
            self.t0,
        )
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_channels()) {
            return invalid(format!(
                "column {bad} outside trajectory with {} channels",
                self.n_channels()
            ));
        }
        let samples = Mat::from_fn(self.len(), cols.len(), |i, j| self.samples[(i, cols[j])]);
        Self::new(samples, self.dt, self.t0)
    }

    /// Applies `f` to every sample row, keeping timing.
    pub fn map_rows(&self, mut f: impl FnMut(&[T], &mut [T])) -> Result<Self> {
        let mut out = Mat::zeros(self.len(), self.n_channels());
        for i in 0..self.len() {
            f(self.row(i), out.row_mut(i));
        }
        Self::new(out, self.dt, self.t0)
    }

    /// Per-channel mean and population standard deviation.
    pub fn channel_stats(&self) -> (Vec<T>, Vec<T>) {
        let n = self.n_channels();
        let count = T::from_count(self.len());
        let mut mean = vec![T::zero(); n];
        for row in self.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![T::zero(); n];
        for row in self.rows() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / count).sqrt()).collect();
        (mean, std)
    }

    /// Per-channel `(min, max)`.
    pub fn bounding_box(&self) -> Vec<(T, T)> {
        let mut bb: Vec<(T, T)> = self.row(0).iter().map(|&v| (v, v)).collect();
        for row in self.rows() {
            for (b, &v) in bb.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bb
    }

    /// Converts the sample type, e.g. to run a measure in double precision.
    pub fn cast<U: Scalar>(&self) -> Trajectory<U> {
        Trajectory {
            samples: self.samples.cast(),
            dt: U::lit(self.dt.as_f64()),
            t0: U::lit(self.t0.as_f64()),
        }
    }

    /// Writes the CSV exchange format: header `t,x1,...,xN`, time column
    /// first, every float with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut line = String::from("t");
        for j in 1..=self.n_channels() {
            line.push_str(&format!(",x{j}"));
        }
        writeln!(w, "{line}")?;
        for i in 0..self.len() {
            line.clear();
            line.push_str(&format_float(self.time(i).as_f64()));
            for &v in self.row(i) {
                line.push(',');
                line.push_str(&format_float(v.as_f64()));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Trajectory<f64> {
        Trajectory::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 9.0]], 0.5).unwrap()
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(Trajectory::<f64>::from_rows(&[], 0.1).is_err());
        assert!(Trajectory::from_series(&[1.0], 0.0).is_err());
        assert!(matches!(
            Trajectory::from_series(&[1.0, f64::NAN], 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn slicing_shifts_start_time() {
        let t = demo();
        let s = t.slice(1..3).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.t0(), 0.5);
        assert_eq!(s.row(0), &[3.0, 4.0]);
        assert!(t.slice(2..2).is_err());
    }

    #[test]
    fn stats_and_box() {
        let t = demo();
        let (mean, std) = t.channel_stats();
        assert_eq!(mean, vec![3.0, 5.0]);
        assert!((std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(t.bounding_box(), vec![(1.0, 5.0), (2.0, 9.0)]);
    }

    #[test]
    fn csv_header_and_precision() {
        let csv = demo().to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,x2"));
        let first = lines.next().unwrap();
        assert_eq!(first, "0.0000000000000000e0,1.0000000000000000e0,2.0000000000000000e0");
        let v = 0.1f64 + 0.2;
        assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }
}
