//! CSV exchange and per-channel standardization.

use std::fs::File;
use std::path::Path;

use dsr_core::{Error, Mat64, Trajectory64};
use serde::{Deserialize, Serialize};

use crate::artifacts::write_atomic;
use crate::error::{HarnessError, Result};

/// Largest relative deviation of a time increment from the mean step.
pub const DT_TOLERANCE: f64 = 1e-6;

/// Smallest standard deviation a channel may have when fitting statistics.
pub const MIN_CHANNEL_STD: f64 = 1e-12;

/// Reads a trajectory in the exchange format (header `t,x1,...,xN`, time
/// column first) or as headerless numeric columns sampled every `dt`.
///
/// A `dt` given alongside a time column must agree with the time stamps.
pub fn ingest_csv(path: &Path, dt: Option<f64>) -> Result<Trajectory64> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let parse_err = |line: u64, column: Option<usize>, message: String| HarnessError::Parse {
        path: name.clone(),
        line,
        column,
        message,
    };

    let mut records = reader.records();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut time_column = false;
    let mut first_data_line = 1;
    let mut width = 0;
    while let Some(rec) = records.next() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, None, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rows.is_empty() && width == 0 {
            width = rec.len();
            if rec.iter().any(|c| c.parse::<f64>().is_err()) {
                // Header row.
                time_column = rec.get(0).is_some_and(|c| c.eq_ignore_ascii_case("t"));
                first_data_line = line + 1;
                continue;
            }
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, Some(j + 1), format!("cannot parse `{cell}` as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, Some(j + 1), format!("non-finite value `{cell}`")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(first_data_line, None, "no data rows".into()));
    }
    let n_channels = width - usize::from(time_column);
    if n_channels == 0 {
        return Err(parse_err(1, None, "no channel columns".into()));
    }

    let (dt, t0) = if time_column {
        let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let inferred = match times.len() {
            1 => dt.ok_or_else(|| HarnessError::config(format!("{name}: a single row needs an explicit dt")))?,
            n => (times[n - 1] - times[0]) / (n - 1) as f64,
        };
        if !(inferred > 0.0) {
            return Err(parse_err(first_data_line, Some(1), "time stamps must increase".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - inferred).abs() > DT_TOLERANCE * inferred {
                return Err(parse_err(
                    first_data_line + i as u64 + 1,
                    Some(1),
                    format!("non-uniform sampling: step {} differs from {inferred}", w[1] - w[0]),
                ));
            }
        }
        if let Some(declared) = dt {
            if (declared - inferred).abs() > DT_TOLERANCE * inferred {
                return Err(HarnessError::config(format!(
                    "{name}: declared dt {declared} disagrees with the time column ({inferred})"
                )));
            }
        }
        (inferred, times[0])
    } else {
        let dt = dt.ok_or_else(|| {
            HarnessError::config(format!("{name}: file has no time column; dt must be given"))
        })?;
        (dt, 0.0)
    };

    let skip = usize::from(time_column);
    let data: Vec<f64> = rows.iter().flat_map(|r| r[skip..].iter().copied()).collect();
    let samples = Mat64::from_row_major(rows.len(), n_channels, data)?;
    Ok(Trajectory64::new(samples, dt, t0)?)
}

/// Writes `traj` in the exchange format, atomically.
pub fn export_csv(traj: &Trajectory64, path: &Path) -> Result<()> {
    write_atomic(path, |w| traj.write_csv(w))
}

/// Writes several equally long trajectories side by side with one time
/// column and the given channel names.
pub fn export_columns(path: &Path, dt: f64, t0: f64, names: &[String], columns: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "t,{}", names.join(","))?;
        let len = columns.iter().map(Vec::len).min().unwrap_or(0);
        for i in 0..len {
            let mut line = dsr_core::trajectory::format_float(t0 + i as f64 * dt);
            for c in columns {
                line.push(',');
                line.push_str(&dsr_core::trajectory::format_float(c[i]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

/// Per-channel mean and standard deviation used for z-scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Where standardization statistics come from.
#[derive(Clone, Copy, Debug)]
pub enum StatsSource<'a> {
    /// Estimate from the trajectory itself.
    Fit,
    /// Reuse statistics fitted elsewhere, e.g. on the training split.
    Apply(&'a ChannelStats),
}

/// Z-scores every channel and returns the statistics used.
pub fn standardize(traj: &Trajectory64, source: StatsSource<'_>) -> Result<(Trajectory64, ChannelStats)> {
    let stats = match source {
        StatsSource::Fit => {
            let (mean, std) = traj.channel_stats();
            if std.iter().any(|&s| !(s > MIN_CHANNEL_STD)) {
                return Err(Error::ConstantSeries("standardization channel").into());
            }
            ChannelStats { mean, std }
        }
        StatsSource::Apply(s) => {
            if s.mean.len() != traj.n_channels() || s.std.len() != traj.n_channels() {
                return Err(Error::DimensionMismatch {
                    context: "standardization statistics",
                    expected: traj.n_channels(),
                    got: s.mean.len().min(s.std.len()),
                }
                .into());
            }
            if s.std.iter().any(|&v| !(v > 0.0)) {
                return Err(HarnessError::config("supplied standard deviations must be positive"));
            }
            s.clone()
        }
    };
    let out = traj.map_rows(|r, o| {
        for i in 0..r.len() {
            o[i] = (r[i] - stats.mean[i]) / stats.std[i];
        }
    })?;
    Ok((out, stats))
}

/// Maps standardized values back to data units.
pub fn destandardize(traj: &Trajectory64, stats: &ChannelStats) -> Result<Trajectory64> {
    if stats.mean.len() != traj.n_channels() {
        return Err(Error::DimensionMismatch {
            context: "standardization statistics",
            expected: traj.n_channels(),
            got: stats.mean.len(),
        }
        .into());
    }
    Ok(traj.map_rows(|r, o| {
        for i in 0..r.len() {
            o[i] = r[i] * stats.std[i] + stats.mean[i];
        }
    })?)
}
