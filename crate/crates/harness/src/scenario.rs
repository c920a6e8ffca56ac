//! Reference datasets for the bistability, tipping and noisy-chaos
//! experiments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dsr_core::dynsys::{classify_limit_behavior, integrate, spike_regime, IntegrationSpec, LimitBehavior, RampSpec, SpikeRegime};
use dsr_core::{System64, Trajectory64};
use serde::{Deserialize, Serialize};

use crate::artifacts::write_json;
use crate::config::derive_seed;
use crate::error::{HarnessError, Result};
use crate::ingest::export_csv;
use crate::simulate::add_observation_noise;

pub const NEURON_DT: f64 = 0.05;
pub const LORENZ_DT: f64 = 0.01;

/// Slow gate value of the planar neuron reduction.
pub const BISTABLE_H: f64 = 0.05;
/// Initial `(V, n)` in the point-attractor and limit-cycle basins.
pub const FIXED_POINT_IC: [f64; 2] = [-70.0, 0.0];
pub const LIMIT_CYCLE_IC: [f64; 2] = [-50.0, 0.0];
pub const BISTABLE_DURATION_MS: f64 = 2000.0;

/// Voltage amplitude separating noisy rest from spiking, in mV.
pub const VOLTAGE_AMPLITUDE_TOL: f64 = 10.0;
/// Process noise on `V` (mV per √ms) for the N-tipping runs.
pub const N_TIPPING_NOISE: f64 = 0.7;
pub const N_TIPPING_SEEDS: usize = 20;
pub const N_TIPPING_DURATION_MS: f64 = 4000.0;
/// Leading fraction of a run classified as its initial regime.
pub const N_TIPPING_EARLY_FRACTION: f64 = 0.05;

pub const B_TIPPING_START_G: f64 = 8.0;
pub const B_TIPPING_END_G: f64 = 11.0;
pub const B_TIPPING_DURATION_MS: f64 = 8000.0;
/// Upward crossings of this voltage count as spikes.
pub const SPIKE_THRESHOLD_MV: f64 = -40.0;
/// Width of the windows scanned for the firing regime.
pub const REGIME_WINDOW_MS: f64 = 400.0;

pub const LORENZ_STEPS: usize = 10_000;
pub const LORENZ_TRANSIENT: usize = 1_000;
pub const LORENZ_IC: [f64; 3] = [1.0, 1.0, 1.0];
pub const LORENZ_NOISE_PERCENTS: [f64; 2] = [1.0, 10.0];
pub const LORENZ_NOISY_RUNS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    BistableNeuron,
    NTipping,
    BTipping,
    LorenzNoisy,
}

impl ScenarioName {
    pub const ALL: [Self; 4] = [Self::BistableNeuron, Self::NTipping, Self::BTipping, Self::LorenzNoisy];
}

impl FromStr for ScenarioName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bistable_neuron" => Ok(Self::BistableNeuron),
            "n_tipping" => Ok(Self::NTipping),
            "b_tipping" => Ok(Self::BTipping),
            "lorenz_noisy" => Ok(Self::LorenzNoisy),
            _ => Err(HarnessError::UnknownScenario(s.to_string())),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BistableNeuron => "bistable_neuron",
            Self::NTipping => "n_tipping",
            Self::BTipping => "b_tipping",
            Self::LorenzNoisy => "lorenz_noisy",
        })
    }
}

/// One trajectory of a bundle with what is known about it.
#[derive(Clone, Debug)]
pub struct ScenarioTrace {
    pub label: String,
    pub trajectory: Trajectory64,
    pub info: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug)]
pub struct ScenarioBundle {
    pub name: ScenarioName,
    pub description: String,
    pub seeds: BTreeMap<String, u64>,
    pub traces: Vec<ScenarioTrace>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize)]
struct BundleIndex<'a> {
    name: ScenarioName,
    description: &'a str,
    seeds: &'a BTreeMap<String, u64>,
    metadata: &'a BTreeMap<String, serde_json::Value>,
    traces: Vec<TraceIndex<'a>>,
}

#[derive(Serialize)]
struct TraceIndex<'a> {
    label: &'a str,
    file: String,
    rows: usize,
    channels: usize,
    dt: f64,
    info: &'a BTreeMap<String, serde_json::Value>,
}

impl ScenarioBundle {
    pub fn trace(&self, label: &str) -> Option<&ScenarioTrace> {
        self.traces.iter().find(|t| t.label == label)
    }

    /// Writes one CSV per trace and a `bundle.json` index into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut traces = Vec::new();
        for t in &self.traces {
            let file = format!("{}.csv", t.label);
            export_csv(&t.trajectory, &dir.join(&file))?;
            traces.push(TraceIndex {
                label: &t.label,
                file,
                rows: t.trajectory.len(),
                channels: t.trajectory.n_channels(),
                dt: t.trajectory.dt(),
                info: &t.info,
            });
        }
        write_json(
            &dir.join("bundle.json"),
            &BundleIndex {
                name: self.name,
                description: &self.description,
                seeds: &self.seeds,
                metadata: &self.metadata,
                traces,
            },
        )
    }
}

fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

fn json<T: Serialize>(v: T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// Limit behaviour of the voltage channel over the last `tail_fraction`.
pub fn voltage_behavior(traj: &Trajectory64, tail_fraction: f64) -> Result<LimitBehavior> {
    let v = traj.select_columns(&[0])?;
    Ok(classify_limit_behavior(&v, tail_fraction, VOLTAGE_AMPLITUDE_TOL)?)
}

/// Start index of the first window from which the crossing behaviour holds:
/// the first row after an initially non-oscillating segment where the
/// voltage classification turns to oscillation and stays there.
pub fn basin_crossing(traj: &Trajectory64, early_fraction: f64) -> Result<Option<usize>> {
    let n = traj.len();
    let early = ((n as f64) * early_fraction).round() as usize;
    let head = traj.slice(0..early.max(100).min(n))?;
    if voltage_behavior(&head, 1.0)? == LimitBehavior::Oscillation {
        return Ok(None);
    }
    if voltage_behavior(traj, 0.25)? != LimitBehavior::Oscillation {
        return Ok(None);
    }
    let v = traj.column(0);
    Ok(v.windows(2)
        .position(|w| w[0] < SPIKE_THRESHOLD_MV && w[1] >= SPIKE_THRESHOLD_MV)
        .map(|i| i + 1))
}

/// Firing regime of consecutive windows of the voltage trace.
pub fn windowed_regimes(traj: &Trajectory64, window: usize) -> Vec<SpikeRegime> {
    let v = traj.column(0);
    v.chunks(window)
        .filter(|c| c.len() == window)
        .map(|c| spike_regime(c, SPIKE_THRESHOLD_MV))
        .collect()
}

fn bistable_neuron() -> Result<ScenarioBundle> {
    let sys = System64::neuron_2d(BISTABLE_H);
    let spec = IntegrationSpec::new(NEURON_DT, steps_for(BISTABLE_DURATION_MS, NEURON_DT));
    let mut traces = Vec::new();
    for (label, ic) in [("fixed_point_basin", FIXED_POINT_IC), ("limit_cycle_basin", LIMIT_CYCLE_IC)] {
        let traj = integrate(&sys, &ic, &spec)?;
        let behavior = classify_limit_behavior(&traj, 0.5, 1e-3)?;
        traces.push(ScenarioTrace {
            label: label.into(),
            trajectory: traj,
            info: BTreeMap::from([
                ("initial_condition".into(), json(ic)),
                ("limit_behavior".into(), json(behavior)),
            ]),
        });
    }
    Ok(ScenarioBundle {
        name: ScenarioName::BistableNeuron,
        description: "planar neuron (h fixed) started in the point-attractor and limit-cycle basins".into(),
        seeds: BTreeMap::new(),
        traces,
        metadata: BTreeMap::from([
            ("h".into(), json(BISTABLE_H)),
            ("dt_ms".into(), json(NEURON_DT)),
            ("channels".into(), json(["V", "n"])),
        ]),
    })
}

fn n_tipping(master_seed: u64) -> Result<ScenarioBundle> {
    let sys = System64::neuron_2d(BISTABLE_H);
    let mut traces = Vec::new();
    let mut seeds = BTreeMap::new();
    let mut crossings = Vec::new();
    for k in 0..N_TIPPING_SEEDS {
        let label = format!("noisy_run_{k:02}");
        let seed = derive_seed(master_seed, &label);
        seeds.insert(label.clone(), seed);
        let spec = IntegrationSpec::new(NEURON_DT, steps_for(N_TIPPING_DURATION_MS, NEURON_DT))
            .with_noise(N_TIPPING_NOISE, seed)
            .with_noise_scale(vec![1.0, 0.0]);
        let traj = integrate(&sys, &FIXED_POINT_IC, &spec)?;
        let crossing = basin_crossing(&traj, N_TIPPING_EARLY_FRACTION)?;
        if crossing.is_some() {
            crossings.push(k);
        }
        traces.push(ScenarioTrace {
            label,
            trajectory: traj,
            info: BTreeMap::from([
                ("seed".into(), json(seed)),
                ("crossing_row".into(), json(crossing)),
                ("crossing_time_ms".into(), json(crossing.map(|i| i as f64 * NEURON_DT))),
            ]),
        });
    }
    Ok(ScenarioBundle {
        name: ScenarioName::NTipping,
        description: "planar neuron started at rest with process noise on V; noise may push it across the basin boundary into spiking".into(),
        seeds,
        traces,
        metadata: BTreeMap::from([
            ("h".into(), json(BISTABLE_H)),
            ("dt_ms".into(), json(NEURON_DT)),
            ("noise_std_v".into(), json(N_TIPPING_NOISE)),
            ("initial_condition".into(), json(FIXED_POINT_IC)),
            ("runs_with_crossing".into(), json(&crossings)),
        ]),
    })
}

fn b_tipping() -> Result<ScenarioBundle> {
    let sys = System64::neuron();
    let n_steps = steps_for(B_TIPPING_DURATION_MS, NEURON_DT);
    let ramp = RampSpec {
        parameter_name: "gNMDA".into(),
        start_value: B_TIPPING_START_G,
        end_value: B_TIPPING_END_G,
        start_time: 0.0,
        end_time: B_TIPPING_DURATION_MS,
    };
    let spec = IntegrationSpec::new(NEURON_DT, n_steps).with_ramp(ramp.clone());
    let traj = integrate(&sys, &[-60.0, 0.0, 0.05], &spec)?;
    let window = steps_for(REGIME_WINDOW_MS, NEURON_DT);
    let regimes = windowed_regimes(&traj, window);
    // Onset: first window after which every window is regular spiking.
    let onset_window = (0..regimes.len())
        .find(|&w| regimes[w..].iter().all(|r| *r == SpikeRegime::Spiking))
        .filter(|&w| w > 0 && regimes[..w].contains(&SpikeRegime::Bursting));
    let (train_cut, onset_row) = match onset_window {
        Some(w) => ((w - 1) * window, Some(w * window)),
        None => (traj.len() / 2, None),
    };
    let onset_g = onset_row.map(|r| ramp.value_at(r as f64 * NEURON_DT));
    let train = traj.slice(0..train_cut.max(1))?;
    let test = traj.slice(train_cut.max(1)..traj.len())?;
    Ok(ScenarioBundle {
        name: ScenarioName::BTipping,
        description: "full neuron model with g_NMDA ramped linearly; the training segment ends one window before the bursting-to-spiking onset".into(),
        seeds: BTreeMap::new(),
        traces: vec![
            ScenarioTrace {
                label: "full".into(),
                info: BTreeMap::from([("window_regimes".into(), json(&regimes))]),
                trajectory: traj,
            },
            ScenarioTrace {
                label: "train".into(),
                info: BTreeMap::new(),
                trajectory: train,
            },
            ScenarioTrace {
                label: "withheld".into(),
                info: BTreeMap::new(),
                trajectory: test,
            },
        ],
        metadata: BTreeMap::from([
            ("dt_ms".into(), json(NEURON_DT)),
            ("ramp".into(), json(&ramp)),
            ("regime_window_ms".into(), json(REGIME_WINDOW_MS)),
            ("spike_threshold_mv".into(), json(SPIKE_THRESHOLD_MV)),
            ("train_cut_row".into(), json(train_cut)),
            ("spiking_onset_row".into(), json(onset_row)),
            ("spiking_onset_gnmda".into(), json(onset_g)),
        ]),
    })
}

/// Clean Lorenz-63, observation-noise copies, and repeated runs from the
/// same initial condition with process noise, both at each percentage of
/// the clean channel standard deviations.
fn lorenz_noisy(master_seed: u64) -> Result<ScenarioBundle> {
    let sys = System64::lorenz();
    let full = integrate(&sys, &LORENZ_IC, &IntegrationSpec::new(LORENZ_DT, LORENZ_TRANSIENT + LORENZ_STEPS))?;
    let x0 = full.row(LORENZ_TRANSIENT).to_vec();
    let clean = full.slice(LORENZ_TRANSIENT..full.len())?;
    let (_, std) = clean.channel_stats();
    let mut seeds = BTreeMap::new();
    let mut traces = vec![ScenarioTrace {
        label: "clean".into(),
        trajectory: clean.clone(),
        info: BTreeMap::new(),
    }];
    for pct in LORENZ_NOISE_PERCENTS {
        let label = format!("observation_{pct}pct");
        let seed = derive_seed(master_seed, &label);
        seeds.insert(label.clone(), seed);
        traces.push(ScenarioTrace {
            label,
            trajectory: add_observation_noise(&clean, pct, seed)?,
            info: BTreeMap::from([("noise_percent".into(), json(pct)), ("kind".into(), json("observation"))]),
        });
        for run in 0..LORENZ_NOISY_RUNS {
            let label = format!("dynamic_{pct}pct_run{run}");
            let seed = derive_seed(master_seed, &label);
            seeds.insert(label.clone(), seed);
            let spec = IntegrationSpec::new(LORENZ_DT, LORENZ_STEPS)
                .with_noise(pct / 100.0, seed)
                .with_noise_scale(std.clone());
            traces.push(ScenarioTrace {
                label,
                trajectory: integrate(&sys, &x0, &spec)?,
                info: BTreeMap::from([("noise_percent".into(), json(pct)), ("kind".into(), json("process"))]),
            });
        }
    }
    Ok(ScenarioBundle {
        name: ScenarioName::LorenzNoisy,
        description: "Lorenz-63 with observation noise, and repeated runs from one initial condition with process noise".into(),
        seeds,
        traces,
        metadata: BTreeMap::from([
            ("dt".into(), json(LORENZ_DT)),
            ("initial_condition".into(), json(&x0)),
            ("clean_channel_std".into(), json(&std)),
            (
                "noise_convention".into(),
                json("observation noise std = p% of the clean channel std; process noise std per unit time = p% of the clean channel std"),
            ),
        ]),
    })
}

/// Generates the named bundle. Every random stream derives from `master_seed`.
pub fn scenario(name: ScenarioName, master_seed: u64) -> Result<ScenarioBundle> {
    match name {
        ScenarioName::BistableNeuron => bistable_neuron(),
        ScenarioName::NTipping => n_tipping(master_seed),
        ScenarioName::BTipping => b_tipping(),
        ScenarioName::LorenzNoisy => lorenz_noisy(master_seed),
    }
}
