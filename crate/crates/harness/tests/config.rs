use std::path::Path;

use dsr_harness::config::{apply_override, validate_against_schema, validate_measure_config, ExperimentConfig, TrainingMethod};
use dsr_harness::HarnessError;

const MINIMAL: &str = r#"
[data]
source = "system"
system = "lorenz"
dt = 0.01
n_steps = 2000

[model]
family = "al_rnn"

[training]
method = "stf"
"#;

fn parse(text: &str) -> dsr_harness::Result<ExperimentConfig> {
    ExperimentConfig::from_toml_str(text, None)
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse(MINIMAL).unwrap();
    assert_eq!(cfg.split.train_fraction, 0.8);
    assert!(cfg.standardize);
    assert_eq!(cfg.rollout.n_steps, 10_000);
    assert!(matches!(cfg.training, TrainingMethod::Stf { interval: None, .. }));
}

#[test]
fn zero_train_fraction_is_a_validation_error() {
    let text = format!("{MINIMAL}\n[split]\ntrain_fraction = 0.0\ntest_fraction = 0.2\n");
    let err = parse(&text).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn fractions_summing_above_one_are_rejected() {
    let text = format!("{MINIMAL}\n[split]\ntrain_fraction = 0.8\ntest_fraction = 0.3\n");
    assert_eq!(parse(&text).unwrap_err().exit_code(), 2);
}

#[test]
fn unknown_keys_are_rejected() {
    let text = MINIMAL.replace("n_steps = 2000", "n_steps = 2000\nn_stpes = 3");
    let err = parse(&text).unwrap_err();
    assert!(err.to_string().contains("schema"), "{err}");
}

#[test]
fn initial_condition_must_match_system_dimension() {
    let text = MINIMAL.replace("n_steps = 2000", "n_steps = 2000\ninitial_condition = [1.0, 2.0]");
    assert!(parse(&text).is_err());
}

#[test]
fn reservoir_requires_ridge_training() {
    let text = MINIMAL.replace("family = \"al_rnn\"", "family = \"reservoir\"");
    assert!(parse(&text).is_err());
    let text = text.replace("method = \"stf\"", "method = \"ridge\"");
    assert!(parse(&text).is_ok());
}

#[test]
fn csv_stf_needs_an_explicit_interval() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "t,x\n0,1\n1,2\n2,1\n").unwrap();
    let text = r#"
        [data]
        source = "csv"
        path = "d.csv"
        [model]
        family = "al_rnn"
        [training]
        method = "stf"
    "#;
    assert!(ExperimentConfig::from_toml_str(text, Some(dir.path())).is_err());
    let with_interval = text.replace("method = \"stf\"", "method = \"stf\"\ninterval = 5");
    let cfg = ExperimentConfig::from_toml_str(&with_interval, Some(dir.path())).unwrap();
    match cfg.data {
        dsr_harness::config::DataSource::Csv(c) => assert_eq!(c.path, dir.path().join("d.csv")),
        _ => unreachable!(),
    }
}

#[test]
fn overrides_address_nested_keys() {
    let mut value: serde_json::Value = toml::from_str(MINIMAL).unwrap();
    apply_override(&mut value, "data.n_steps=500").unwrap();
    apply_override(&mut value, "training.optimizer.learning_rate = 5e-4").unwrap();
    apply_override(&mut value, "data.system=neuron2d").unwrap();
    apply_override(&mut value, "data.params.h=0.05").unwrap();
    let cfg = ExperimentConfig::from_json_value(value.clone(), None).unwrap();
    match &cfg.data {
        dsr_harness::config::DataSource::System(s) => {
            assert_eq!(s.n_steps, 500);
            assert_eq!(s.params["h"], 0.05);
        }
        _ => unreachable!(),
    }
    assert_eq!(cfg.training.optimizer().unwrap().learning_rate, 5e-4);
    assert!(apply_override(&mut value, "no_equals_sign").is_err());
    assert!(apply_override(&mut value, "data.n_steps.deeper=1").is_err());
}

#[test]
fn json_round_trip_preserves_config() {
    let cfg = parse(MINIMAL).unwrap();
    let value = cfg.to_json_value();
    validate_against_schema(&value).unwrap();
    assert_eq!(ExperimentConfig::from_json_value(value, None).unwrap(), cfg);
}

#[test]
fn default_measure_config_matches_schema() {
    let cfg = parse(MINIMAL).unwrap();
    validate_measure_config(&serde_json::to_value(&cfg.measures).unwrap()).unwrap();
    let bad = serde_json::json!({ "n_bins_per_dim": 0 });
    assert!(validate_measure_config(&bad).is_err());
}

#[test]
fn reference_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 2);
}

#[test]
fn seeds_are_derived_per_label() {
    let cfg = parse(MINIMAL).unwrap();
    let seeds = cfg.seeds();
    assert_eq!(seeds.len(), 5);
    let mut values: Vec<u64> = seeds.values().copied().collect();
    values.dedup();
    assert_eq!(values.len(), 5);
    let other = parse(&format!("seed = 9\n{MINIMAL}")).unwrap();
    assert_ne!(other.seed_for("init"), cfg.seed_for("init"));
}
