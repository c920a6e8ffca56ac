use dsr_core::dynsys::{classify_limit_behavior, integrate, spike_regime, IntegrationSpec, LimitBehavior, SpikeRegime};
use dsr_core::System64;
use dsr_harness::scenario::{
    scenario, voltage_behavior, ScenarioName, BISTABLE_H, NEURON_DT, N_TIPPING_SEEDS, SPIKE_THRESHOLD_MV,
};
use dsr_harness::simulate::add_observation_noise;
use dsr_harness::HarnessError;

#[test]
fn names_parse_and_unknown_names_fail() {
    for name in ScenarioName::ALL {
        assert_eq!(name.to_string().parse::<ScenarioName>().unwrap(), name);
    }
    assert_eq!("B-Tipping".parse::<ScenarioName>().unwrap(), ScenarioName::BTipping);
    let err = "r_tipping".parse::<ScenarioName>().unwrap_err();
    assert!(matches!(err, HarnessError::UnknownScenario(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn bistable_basins_classify_differently() {
    let b = scenario(ScenarioName::BistableNeuron, 0).unwrap();
    let fixed = &b.trace("fixed_point_basin").unwrap().trajectory;
    let cycle = &b.trace("limit_cycle_basin").unwrap().trajectory;
    assert_eq!(classify_limit_behavior(fixed, 0.5, 1e-3).unwrap(), LimitBehavior::FixedPoint);
    assert_eq!(classify_limit_behavior(cycle, 0.5, 1e-3).unwrap(), LimitBehavior::Oscillation);
}

/// Attractor reached by the noiseless planar neuron from `state`.
fn settles_to(state: &[f64]) -> LimitBehavior {
    let sys = System64::neuron_2d(BISTABLE_H);
    let traj = integrate(&sys, state, &IntegrationSpec::new(NEURON_DT, 40_000)).unwrap();
    classify_limit_behavior(&traj, 0.5, 1e-3).unwrap()
}

#[test]
fn noise_drives_some_runs_across_the_basin_boundary() {
    let b = scenario(ScenarioName::NTipping, 0).unwrap();
    assert_eq!(b.traces.len(), N_TIPPING_SEEDS);
    assert_eq!(b.seeds.len(), N_TIPPING_SEEDS);
    let mut crossed = 0;
    for t in &b.traces {
        if let Some(row) = t.info["crossing_row"].as_u64() {
            crossed += 1;
            let traj = &t.trajectory;
            assert_eq!(settles_to(traj.row(row as usize / 2)), LimitBehavior::FixedPoint, "{}", t.label);
            assert_eq!(settles_to(traj.last()), LimitBehavior::Oscillation, "{}", t.label);
        }
    }
    assert!(crossed >= 1, "no basin crossing in {N_TIPPING_SEEDS} runs");
    assert!(crossed < N_TIPPING_SEEDS, "every run crossed; the noise is not a perturbation");
}

#[test]
fn n_tipping_depends_on_master_seed_only() {
    let a = scenario(ScenarioName::NTipping, 11).unwrap();
    let b = scenario(ScenarioName::NTipping, 11).unwrap();
    let c = scenario(ScenarioName::NTipping, 12).unwrap();
    assert_eq!(a.traces[0].trajectory, b.traces[0].trajectory);
    assert_ne!(a.traces[0].trajectory, c.traces[0].trajectory);
}

#[test]
fn ramp_training_segment_ends_before_spiking_onset() {
    let b = scenario(ScenarioName::BTipping, 0).unwrap();
    let cut = b.metadata["train_cut_row"].as_u64().unwrap() as usize;
    let onset = b.metadata["spiking_onset_row"].as_u64().expect("onset detected") as usize;
    assert!(cut < onset);
    let train = &b.trace("train").unwrap().trajectory;
    let withheld = &b.trace("withheld").unwrap().trajectory;
    assert_eq!(train.len(), cut);
    assert_eq!(spike_regime(&train.column(0), SPIKE_THRESHOLD_MV), SpikeRegime::Bursting);
    let tail = withheld.slice(withheld.len() / 2..withheld.len()).unwrap();
    assert_eq!(spike_regime(&tail.column(0), SPIKE_THRESHOLD_MV), SpikeRegime::Spiking);
    assert_eq!(voltage_behavior(&tail, 0.5).unwrap(), LimitBehavior::Oscillation);
}

#[test]
fn lorenz_noise_levels() {
    let b = scenario(ScenarioName::LorenzNoisy, 0).unwrap();
    let clean = &b.trace("clean").unwrap().trajectory;
    assert_eq!(&add_observation_noise(clean, 0.0, 99).unwrap(), clean);
    let (_, std) = clean.channel_stats();
    for pct in [1.0, 10.0] {
        let noisy = &b.trace(&format!("observation_{pct}pct")).unwrap().trajectory;
        for c in 0..3 {
            let d: Vec<f64> = noisy.column(c).iter().zip(clean.column(c)).map(|(a, b)| a - b).collect();
            let rms = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
            let ratio = rms / (pct / 100.0 * std[c]);
            assert!((ratio - 1.0).abs() < 0.05, "channel {c} at {pct}%: ratio {ratio}");
        }
        let runs: Vec<_> = (0..3).map(|r| &b.trace(&format!("dynamic_{pct}pct_run{r}")).unwrap().trajectory).collect();
        assert_eq!(runs[0].row(0), runs[1].row(0));
        assert_ne!(runs[0].last(), runs[1].last());
    }
}

#[test]
fn bundles_write_csv_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let b = scenario(ScenarioName::BistableNeuron, 0).unwrap();
    b.write(dir.path()).unwrap();
    let index: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bundle.json")).unwrap()).unwrap();
    assert_eq!(index["name"], "bistable_neuron");
    assert_eq!(index["traces"].as_array().unwrap().len(), 2);
    let back = dsr_harness::ingest::ingest_csv(&dir.path().join("limit_cycle_basin.csv"), None).unwrap();
    assert_eq!(back, b.trace("limit_cycle_basin").unwrap().trajectory);
}
