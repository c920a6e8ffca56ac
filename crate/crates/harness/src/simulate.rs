//! Ground-truth data generation for configured systems.

use dsr_core::dynsys::{integrate, IntegrationSpec};
use dsr_core::measures::{lyapunov_spectrum, FlowTangent, LyapunovSpectrum};
use dsr_core::{System64, Trajectory64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SimulationSource;
use crate::error::{HarnessError, Result};

pub struct Simulated {
    /// Recorded channels, with observation noise when configured.
    pub observed: Trajectory64,
    /// The same channels without observation noise.
    pub clean: Trajectory64,
    pub system: System64,
    /// Full state at the last recorded step.
    pub final_state: Vec<f64>,
}

pub fn build_system(src: &SimulationSource) -> Result<System64> {
    let mut system = System64::from_id(src.system);
    for (name, value) in &src.params {
        system.set_param(name, *value)?;
    }
    system.validate()?;
    Ok(system)
}

/// Integrates `src` with process noise drawn from `sim_seed` and observation
/// noise from `obs_seed`. The transient rows and the initial state are
/// dropped, leaving `n_steps` rows.
pub fn simulate(src: &SimulationSource, sim_seed: u64, obs_seed: u64) -> Result<Simulated> {
    let system = build_system(src)?;
    let mut spec = IntegrationSpec::new(src.dt, src.transient + src.n_steps);
    if src.process_noise > 0.0 {
        spec = spec.with_noise(src.process_noise, sim_seed);
        if let Some(scale) = &src.process_noise_scale {
            spec = spec.with_noise_scale(scale.clone());
        }
    }
    let full = integrate(&system, &src.initial_state(), &spec)?;
    let kept = full.slice(src.transient + 1..full.len())?;
    let final_state = kept.last().to_vec();
    let clean = match &src.observed_channels {
        Some(ch) => kept.select_columns(ch)?,
        None => kept,
    };
    let observed = add_observation_noise(&clean, src.observation_noise_percent, obs_seed)?;
    Ok(Simulated {
        observed,
        clean,
        system,
        final_state,
    })
}

/// Adds white Gaussian noise whose standard deviation is `percent`% of each
/// channel's standard deviation. Zero percent returns the input unchanged.
pub fn add_observation_noise(traj: &Trajectory64, percent: f64, seed: u64) -> Result<Trajectory64> {
    if !(percent >= 0.0) {
        return Err(HarnessError::config("noise percentage must be non-negative"));
    }
    if percent == 0.0 {
        return Ok(traj.clone());
    }
    let (_, std) = traj.channel_stats();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(traj.map_rows(|r, o| {
        for i in 0..r.len() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            o[i] = r[i] + percent / 100.0 * std[i] * xi;
        }
    })?)
}

/// Lyapunov spectrum of the simulator along its orbit from `x0`, per time
/// unit.
pub fn ground_truth_spectrum(
    system: &System64,
    x0: &[f64],
    dt: f64,
    n_steps: usize,
    renorm_interval: usize,
) -> Result<LyapunovSpectrum> {
    let mut tangent = FlowTangent::new(system.clone(), dt)?;
    Ok(lyapunov_spectrum(&mut tangent, x0, n_steps, renorm_interval)?)
}
