use std::path::Path;

use dsr_core::Trajectory64;
use dsr_harness::config::ExperimentConfig;
use dsr_harness::ingest::{destandardize, export_csv, standardize, ChannelStats, StatsSource};
use dsr_harness::pipeline::{prepare, split};
use dsr_harness::HarnessError;

fn drifting(n: usize) -> Trajectory64 {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = i as f64 * 0.1;
            vec![t.sin() + 0.05 * t, (0.7 * t).cos() * (1.0 + 0.01 * t)]
        })
        .collect();
    Trajectory64::from_rows(&rows, 0.1).unwrap()
}

fn csv_config(path: &Path, embedding: bool) -> ExperimentConfig {
    let mut text = format!(
        r#"
        [data]
        source = "csv"
        path = "{}"

        [split]
        train_fraction = 0.7
        test_fraction = 0.3

        [model]
        family = "al_rnn"

        [training]
        method = "stf"
        interval = 10
        "#,
        path.display()
    );
    if embedding {
        text.push_str("\n[embedding]\nchannel = 0\n");
    }
    ExperimentConfig::from_toml_str(&text, None).unwrap()
}

#[test]
fn applying_unit_statistics_is_identity() {
    let traj = drifting(50);
    let unit = ChannelStats {
        mean: vec![0.0, 0.0],
        std: vec![1.0, 1.0],
    };
    let (out, _) = standardize(&traj, StatsSource::Apply(&unit)).unwrap();
    assert_eq!(out, traj);
}

#[test]
fn destandardize_inverts_standardize() {
    let traj = drifting(200);
    let (z, stats) = standardize(&traj, StatsSource::Fit).unwrap();
    let back = destandardize(&z, &stats).unwrap();
    for i in 0..traj.len() {
        for (a, b) in traj.row(i).iter().zip(back.row(i)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_channel_cannot_be_fitted() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 3.0]).collect();
    let traj = Trajectory64::from_rows(&rows, 1.0).unwrap();
    assert!(matches!(
        standardize(&traj, StatsSource::Fit),
        Err(HarnessError::Core(dsr_core::Error::ConstantSeries(_)))
    ));
}

#[test]
fn test_split_statistics_differ_under_drift() {
    let traj = drifting(1000);
    let train = traj.slice(0..800).unwrap();
    let test = traj.slice(800..1000).unwrap();
    let (_, stats) = standardize(&train, StatsSource::Fit).unwrap();
    let (z, _) = standardize(&test, StatsSource::Apply(&stats)).unwrap();
    let (m, _) = z.channel_stats();
    assert!(m[0] > 1.0, "drifting channel should leave the training range, mean {}", m[0]);
}

/// The pipeline fits on the training split only; an oracle that fits on the
/// whole series produces different training and test coordinates.
#[test]
fn pipeline_does_not_leak_test_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("drift.csv");
    let traj = drifting(2000);
    export_csv(&traj, &path).unwrap();
    let cfg = csv_config(&path, false);
    let series = dsr_harness::pipeline::load_data(&cfg).unwrap().observed;
    let (train, test) = split(&series, &cfg.split).unwrap();
    let prepared = prepare(&cfg, &train, &test).unwrap();

    let (fit_train, stats) = standardize(&train, StatsSource::Fit).unwrap();
    assert_eq!(prepared.train, fit_train);
    assert_eq!(prepared.stats.as_ref(), Some(&stats));

    let (leaky_all, _) = standardize(&series, StatsSource::Fit).unwrap();
    let leaky_train = leaky_all.slice(0..train.len()).unwrap();
    let leaky_test = leaky_all.slice(train.len()..series.len()).unwrap();
    let max_diff = |a: &Trajectory64, b: &Trajectory64| {
        (0..a.len())
            .flat_map(|i| a.row(i).iter().zip(b.row(i)).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    };
    assert!(max_diff(&prepared.train, &leaky_train) > 0.1);
    assert!(max_diff(&prepared.test, &leaky_test) > 0.1);
}

/// Embedding parameters depend on the training split alone: appending
/// arbitrary test data leaves them unchanged.
#[test]
fn embedding_is_selected_on_training_split() {
    let dir = tempfile::tempdir().unwrap();
    let traj = drifting(3000);
    let a = dir.path().join("a.csv");
    export_csv(&traj, &a).unwrap();
    let cfg = csv_config(&a, true);
    let (train, test) = split(&traj, &cfg.split).unwrap();
    let p1 = prepare(&cfg, &train, &test).unwrap();
    let noise: Vec<Vec<f64>> = (0..test.len()).map(|i| vec![((i * 7919) % 13) as f64, (i % 5) as f64]).collect();
    let other_test = Trajectory64::from_rows(&noise, 0.1).unwrap();
    let p2 = prepare(&cfg, &train, &other_test).unwrap();
    assert_eq!(p1.embedding, p2.embedding);
    assert_eq!(p1.train, p2.train);
    let (_, spec) = p1.embedding.unwrap();
    assert_eq!(p1.train.n_channels(), spec.dimension);
}
