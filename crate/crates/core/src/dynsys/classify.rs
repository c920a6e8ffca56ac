use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Coarse classification of where a trajectory ends up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitBehavior {
    FixedPoint,
    Oscillation,
    Unresolved,
}

/// Classifies the tail (last `tail_fraction` of rows) of `traj`.
///
/// Fixed point: every channel's peak-to-peak amplitude is below `tol`.
/// Oscillation: every channel has amplitude at least `tol` and crosses its
/// tail mean at least three times. Anything else is unresolved.
pub fn classify_limit_behavior<T: Scalar>(
    traj: &Trajectory<T>,
    tail_fraction: f64,
    tol: T,
) -> Result<LimitBehavior> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return invalid("tail_fraction must lie in (0, 1]");
    }
    let tail_len = (traj.len() as f64 * tail_fraction).floor() as usize;
    if tail_len < 100 {
        return Err(Error::TooShort {
            context: "classify_limit_behavior tail",
            needed: 100,
            got: tail_len,
        });
    }
    let start = traj.len() - tail_len;
    let mut all_fixed = true;
    let mut all_oscillating = true;
    for c in 0..traj.n_channels() {
        let col: Vec<T> = (start..traj.len()).map(|i| traj.row(i)[c]).collect();
        let (lo, hi) = col
            .iter()
            .fold((col[0], col[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let amplitude = hi - lo;
        let mean = col.iter().copied().sum::<T>() / T::from_count(col.len());
        let crossings = col
            .windows(2)
            .filter(|w| (w[0] - mean) * (w[1] - mean) < T::zero())
            .count();
        if amplitude >= tol {
            all_fixed = false;
        }
        if amplitude < tol || crossings < 3 {
            all_oscillating = false;
        }
    }
    Ok(if all_fixed {
        LimitBehavior::FixedPoint
    } else if all_oscillating {
        LimitBehavior::Oscillation
    } else {
        LimitBehavior::Unresolved
    })
}

/// Firing pattern of a membrane-potential trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeRegime {
    /// Fewer than three spikes.
    Quiescent,
    /// Near-regular inter-spike intervals.
    Spiking,
    /// Spike clusters separated by long pauses.
    Bursting,
}

/// Longest over shortest inter-spike interval above which a train counts
/// as bursting.
pub const BURST_ISI_RATIO: f64 = 3.0;

/// Detects upward crossings of `threshold` and classifies the train by the
/// ratio of its longest to shortest inter-spike interval.
pub fn spike_regime<T: Scalar>(voltage: &[T], threshold: T) -> SpikeRegime {
    let spikes: Vec<usize> = voltage
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < threshold && w[1] >= threshold)
        .map(|(i, _)| i)
        .collect();
    if spikes.len() < 3 {
        return SpikeRegime::Quiescent;
    }
    let isi: Vec<usize> = spikes.windows(2).map(|w| w[1] - w[0]).collect();
    let max = *isi.iter().max().expect("non-empty");
    let min = *isi.iter().min().expect("non-empty");
    if max as f64 > BURST_ISI_RATIO * min as f64 {
        SpikeRegime::Bursting
    } else {
        SpikeRegime::Spiking
    }
}
