use std::io::Write;

use dsr_core::Trajectory64;
use dsr_harness::ingest::{export_csv, ingest_csv, standardize, StatsSource};
use dsr_harness::HarnessError;
use proptest::prelude::*;

fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
    path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn export_then_ingest_is_bit_exact(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..40),
        dt in 1e-3f64..1.0,
    ) {
        let traj = Trajectory64::from_rows(&rows, dt).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        export_csv(&traj, &path).unwrap();
        let back = ingest_csv(&path, None).unwrap();
        prop_assert_eq!(back.len(), traj.len());
        prop_assert_eq!(back.n_channels(), 3);
        for i in 0..traj.len() {
            for (a, b) in traj.row(i).iter().zip(back.row(i)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        prop_assert!((back.dt() - dt).abs() <= 1e-9 * dt);
    }

    #[test]
    fn fitted_standardization_is_zero_mean_unit_std(
        rows in prop::collection::vec(prop::collection::vec(-100f64..100.0, 2), 20..200),
    ) {
        let traj = Trajectory64::from_rows(&rows, 0.1).unwrap();
        let (_, std) = traj.channel_stats();
        prop_assume!(std.iter().all(|&s| s > 1e-3));
        let (z, stats) = standardize(&traj, StatsSource::Fit).unwrap();
        let (m, s) = z.channel_stats();
        for c in 0..2 {
            prop_assert!(m[c].abs() < 1e-12, "mean {}", m[c]);
            prop_assert!((s[c] - 1.0).abs() < 1e-12, "std {}", s[c]);
            prop_assert_eq!(stats.std[c], std[c]);
        }
    }
}

#[test]
fn nan_cell_reports_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "bad.csv", "t,x,y\n0.0,1.0,2.0\n0.1,NaN,3.0\n0.2,1.0,2.0\n");
    match ingest_csv(&path, None) {
        Err(HarnessError::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(column, Some(2));
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unparsable_cell_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "bad.csv", "t,x\n0,1\n1,2\n2,abc\n");
    let err = ingest_csv(&path, None).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 4") && msg.contains("column 2"), "{msg}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn headerless_two_columns_with_dt() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "plain.csv", "1,2\n3,4\n5,6\n7,8\n");
    let traj = ingest_csv(&path, Some(0.5)).unwrap();
    assert_eq!(traj.n_channels(), 2);
    assert_eq!(traj.len(), 4);
    assert_eq!(traj.dt(), 0.5);
    assert_eq!(traj.row(2), &[5.0, 6.0]);
    assert!(ingest_csv(&path, None).is_err());
}

#[test]
fn header_without_time_column_keeps_all_channels() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "named.csv", "a,b\n1,2\n3,4\n");
    let traj = ingest_csv(&path, Some(1.0)).unwrap();
    assert_eq!(traj.n_channels(), 2);
    assert_eq!(traj.len(), 2);
}

#[test]
fn non_uniform_time_stamps_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "jitter.csv", "t,x\n0.0,1\n0.1,2\n0.2001,3\n0.3,4\n");
    match ingest_csv(&path, None) {
        Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a sampling error, got {other:?}"),
    }
    let ok = write_file(&dir, "ok.csv", "t,x\n0.0,1\n0.1,2\n0.2,3\n0.3,4\n");
    assert!(ingest_csv(&ok, None).is_ok());
}

#[test]
fn declared_dt_must_match_time_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "t.csv", "t,x\n0,1\n1,2\n2,3\n");
    assert!(ingest_csv(&path, Some(1.0)).is_ok());
    assert!(ingest_csv(&path, Some(0.5)).is_err());
}

#[test]
fn comments_and_whitespace_are_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "c.csv", "# recorded channels\nt, x\n0, 1.5\n 1 ,2.5\n");
    let traj = ingest_csv(&path, None).unwrap();
    assert_eq!(traj.column(0), vec![1.5, 2.5]);
}

#[test]
fn ragged_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "r.csv", "t,x,y\n0,1,2\n1,2\n");
    assert!(ingest_csv(&path, None).is_err());
}
