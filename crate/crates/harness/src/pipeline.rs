//! The simulate → embed → train → roll out → measure pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dsr_core::embedding::{delay_embed, false_nearest_neighbors, select_lag, EmbeddingSpec};
use dsr_core::measures::{EvalReport, MeasureConfig};
use dsr_core::models::{init_model, Checkpoint, Model, ModelFamily, ObservationModel};
use dsr_core::training::{
    forcing_interval, train_gtf, train_ms, train_rc_ridge, train_stf, StfConfig, TrainingHistory,
};
use dsr_core::{System64, Trajectory64};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    write_json, Failure, Manifest, RunStatus, MODEL_FILE, REPORT_FILE, ROLLOUT_FILE, TRAIN_LOG_FILE,
};
use crate::config::{DataSource, ExperimentConfig, TrainingMethod};
use crate::error::{HarnessError, Result, Stage, StageContext};
use crate::ingest::{export_csv, ingest_csv, standardize, ChannelStats, StatsSource};
use crate::simulate::{ground_truth_spectrum, simulate};

const ROLLOUT_CONVENTION: &str =
    "roll-outs start from the last inferred training state (B⁺x_T for PLRNNs, the driven reservoir state for RC)";
const NOISE_CONVENTION: &str = "observation noise std is a percentage of each clean channel's std";
const COORDINATE_CONVENTION: &str =
    "model, rollout.csv and report measures use training coordinates (standardized with training-split statistics when enabled)";
const SEED_CONVENTION: &str =
    "optimizer and measure seeds are replaced by seeds derived from the master seed (see `seeds`)";

/// Observations after loading, before splitting.
pub struct LoadedData {
    pub observed: Trajectory64,
    /// The simulator and a state on its orbit, for simulated sources.
    pub system: Option<(System64, Vec<f64>)>,
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    match &cfg.data {
        DataSource::System(src) => {
            let sim = simulate(src, cfg.seed_for("simulation"), cfg.seed_for("observation_noise"))?;
            Ok(LoadedData {
                observed: sim.observed,
                system: Some((sim.system, sim.final_state)),
            })
        }
        DataSource::Csv(src) => Ok(LoadedData {
            observed: ingest_csv(&src.path, src.dt)?,
            system: None,
        }),
    }
}

/// Contiguous `(train, test)` split.
pub fn split(traj: &Trajectory64, spec: &crate::config::SplitSpec) -> Result<(Trajectory64, Trajectory64)> {
    let (n_train, n_test) = spec.counts(traj.len())?;
    Ok((traj.slice(0..n_train)?, traj.slice(n_train..n_train + n_test)?))
}

/// Training-coordinate data for the model.
pub struct PreparedData {
    pub train: Trajectory64,
    pub test: Trajectory64,
    pub stats: Option<ChannelStats>,
    pub embedding: Option<(usize, EmbeddingSpec)>,
}

/// Standardizes with training statistics and applies the delay embedding,
/// whose lag and dimension are selected on the training split only.
pub fn prepare(cfg: &ExperimentConfig, train: &Trajectory64, test: &Trajectory64) -> Result<PreparedData> {
    let (train, test, stats) = if cfg.standardize {
        let (tr, stats) = standardize(train, StatsSource::Fit).stage(Stage::Standardize)?;
        let (te, _) = standardize(test, StatsSource::Apply(&stats)).stage(Stage::Standardize)?;
        (tr, te, Some(stats))
    } else {
        (train.clone(), test.clone(), None)
    };
    let Some(emb) = &cfg.embedding else {
        return Ok(PreparedData {
            train,
            test,
            stats,
            embedding: None,
        });
    };
    let embed = || -> Result<PreparedData> {
        if emb.channel >= train.n_channels() {
            return Err(HarnessError::config(format!(
                "embedding channel {} out of range for {} channels",
                emb.channel,
                train.n_channels()
            )));
        }
        let tr = train.select_columns(&[emb.channel])?;
        let te = test.select_columns(&[emb.channel])?;
        let lag = match emb.lag {
            Some(l) => l,
            None => select_lag(&tr)?,
        };
        let dimension = match emb.dimension {
            Some(d) => d,
            None => false_nearest_neighbors(&tr, lag, emb.max_dimension, emb.fnn_ratio)?,
        };
        let spec = EmbeddingSpec::new(dimension, lag)?;
        Ok(PreparedData {
            train: delay_embed(&tr, spec)?,
            test: delay_embed(&te, spec)?,
            stats: stats.clone(),
            embedding: Some((emb.channel, spec)),
        })
    };
    embed().stage(Stage::Embed)
}

/// Output of the training stage.
pub struct Trained {
    pub model: Model<f64>,
    pub observation: ObservationModel<f64>,
    pub log: TrainLog,
    /// Latent state from which the roll-out starts.
    pub initial_state: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub method: String,
    pub forcing_interval: Option<usize>,
    pub history: Option<TrainingHistory>,
    pub ridge_train_mse: Option<f64>,
}

/// Forcing interval for STF: configured, or the simulator's predictability
/// time in samples.
pub fn resolve_interval(
    cfg: &ExperimentConfig,
    system: Option<&(System64, Vec<f64>)>,
    dt: f64,
    manifest: &mut Manifest,
) -> Result<Option<usize>> {
    let TrainingMethod::Stf { interval, .. } = &cfg.training else {
        return Ok(None);
    };
    if let Some(i) = interval {
        return Ok(Some(*i));
    }
    let (sys, x0) = system.ok_or_else(|| HarnessError::config("STF without an interval needs a simulated system"))?;
    let m = &cfg.measures;
    let spec = ground_truth_spectrum(sys, x0, dt, m.lyapunov_steps, m.renorm_interval)?;
    let lambda = spec.max_exponent();
    manifest.resolved.ground_truth_lambda_max = Some(lambda);
    Ok(Some(forcing_interval(lambda, dt)?))
}

/// Initializes and trains the configured model on `train`.
pub fn train_model(cfg: &ExperimentConfig, train: &Trajectory64, interval: Option<usize>) -> Result<Trained> {
    let n = train.n_channels();
    let spec = cfg.model.spec(n);
    let mut model: Model<f64> = init_model(&spec, cfg.seed_for("init"), &cfg.model.init).stage(Stage::Init)?;
    let training_seed = cfg.seed_for("training");
    let mut method = cfg.training.clone();
    if let Some(opt) = method.optimizer_mut() {
        opt.seed = training_seed;
    }
    let mut log = TrainLog {
        method: method.name().into(),
        forcing_interval: interval,
        ..Default::default()
    };
    let run = || -> Result<(Model<f64>, ObservationModel<f64>, TrainLog, Vec<f64>)> {
        if spec.family == ModelFamily::Reservoir {
            let TrainingMethod::Ridge { lambda, washout } = method else {
                unreachable!("validated: reservoirs train by ridge regression");
            };
            let Model::Reservoir(rc) = &mut model else {
                unreachable!("reservoir spec yields a reservoir");
            };
            let fit = train_rc_ridge(rc, train, lambda, washout)?;
            log.ridge_train_mse = Some(fit.train_mse);
            let om = ObservationModel::identity_prefix(n, n)?;
            return Ok((model, om, log, fit.final_state));
        }
        let om = ObservationModel::identity_prefix(n, spec.latent_dim)?;
        let history = match &method {
            TrainingMethod::Stf {
                forced_units, optimizer, ..
            } => {
                let stf = StfConfig {
                    interval: interval.expect("resolved before training"),
                    forced_units: *forced_units,
                    optimizer: optimizer.clone(),
                };
                train_stf(&mut model, &om, train, &stf)?
            }
            TrainingMethod::Gtf(g) => train_gtf(&mut model, &om, train, g)?,
            TrainingMethod::Ms(ms) => train_ms(&mut model, &om, train, ms)?.history,
            TrainingMethod::Ridge { .. } => unreachable!("validated: ridge applies to reservoirs"),
        };
        log.history = Some(history);
        let z0 = om.infer_state(train.last());
        Ok((model, om, log, z0))
    };
    let (model, observation, log, initial_state) = run().stage(Stage::Train)?;
    Ok(Trained {
        model,
        observation,
        log,
        initial_state,
    })
}

/// Free-running roll-out of `n_steps` observations, on the time axis that
/// continues the training split.
pub fn rollout(
    model: &Model<f64>,
    om: &ObservationModel<f64>,
    z0: &[f64],
    n_steps: usize,
    dt: f64,
    t_start: f64,
) -> Result<(Trajectory64, Trajectory64)> {
    let (latent, observed) = model.generate(om, z0, n_steps)?;
    Ok((latent.with_time_base(dt, t_start)?, observed.with_time_base(dt, t_start)?))
}

/// Long-term measures against `test`, the model spectrum along the roll-out
/// and forecast scores of the roll-out's leading steps against `test`
/// (shifted by `forecast_offset` roll-out steps).
#[allow(clippy::too_many_arguments)]
pub fn measure(
    model: &Model<f64>,
    latent: &Trajectory64,
    generated: &Trajectory64,
    train: &Trajectory64,
    test: &Trajectory64,
    forecast_offset: usize,
    dt: f64,
    mcfg: &MeasureConfig,
) -> Result<EvalReport> {
    let mut report = EvalReport::long_term(test, generated, mcfg)?;
    if let Err(e) = report.add_model_lyapunov(model, latent.last(), dt, mcfg) {
        report.provenance.notes.push(format!("model Lyapunov spectrum unavailable: {e}"));
    }
    let n = test.len().min(generated.len().saturating_sub(forecast_offset));
    if n == 0 {
        report.provenance.notes.push("forecast scores skipped: roll-out shorter than the offset".into());
        return Ok(report);
    }
    let truth = test.slice(0..n)?;
    let forecast = generated.slice(forecast_offset..forecast_offset + n)?;
    if let Err(e) = report.add_forecast(&truth, &forecast, train, mcfg) {
        report.provenance.notes.push(format!("forecast scores unavailable: {e}"));
    }
    Ok(report)
}

/// Result of a pipeline run.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub report: Option<EvalReport>,
}

/// Runs the full pipeline into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    run_until(cfg, dir, Stage::Measure)
}

/// Runs the pipeline through `last` (at least the data stage) and writes
/// every artifact produced so far. The manifest is rewritten after each
/// stage; on failure it is marked incomplete with the failing stage.
pub fn run_until(cfg: &ExperimentConfig, dir: &Path, last: Stage) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for stale in [MODEL_FILE, ROLLOUT_FILE, REPORT_FILE, TRAIN_LOG_FILE] {
        let p = dir.join(stale);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| HarnessError::io(&p, e))?;
        }
    }
    let mut manifest = Manifest::new(cfg.clone());
    manifest.conventions = vec![
        ROLLOUT_CONVENTION.into(),
        NOISE_CONVENTION.into(),
        COORDINATE_CONVENTION.into(),
        SEED_CONVENTION.into(),
    ];
    manifest.save(dir)?;
    match execute(cfg, dir, last, &mut manifest) {
        Ok(report) => {
            manifest.status = RunStatus::Complete;
            manifest.save(dir)?;
            Ok(RunOutcome {
                dir: dir.to_path_buf(),
                manifest,
                report,
            })
        }
        Err(e) => {
            manifest.status = RunStatus::Incomplete;
            manifest.failure = Some(Failure {
                stage: e.stage(),
                message: e.to_string(),
            });
            manifest.save(dir)?;
            Err(e)
        }
    }
}

fn execute(cfg: &ExperimentConfig, dir: &Path, last: Stage, manifest: &mut Manifest) -> Result<Option<EvalReport>> {
    let data = load_data(cfg).stage(Stage::Data)?;
    let dt = data.observed.dt();
    manifest.resolved.n_rows = data.observed.len();
    manifest.resolved.dt = dt;
    manifest.stages_completed.push(Stage::Data);

    let (train_raw, test_raw) = split(&data.observed, &cfg.split).stage(Stage::Split)?;
    manifest.resolved.train_rows = train_raw.len();
    manifest.resolved.test_rows = test_raw.len();
    manifest.stages_completed.push(Stage::Split);
    if last == Stage::Split {
        return Ok(None);
    }

    let prepared = prepare(cfg, &train_raw, &test_raw)?;
    manifest.resolved.standardization = prepared.stats.clone();
    manifest.resolved.embedding = prepared.embedding.map(|(c, s)| (c, s.dimension, s.lag));
    manifest.stages_completed.push(Stage::Standardize);
    if prepared.embedding.is_some() {
        manifest.stages_completed.push(Stage::Embed);
    }

    let interval = resolve_interval(cfg, data.system.as_ref(), dt, manifest).stage(Stage::Train)?;
    manifest.resolved.forcing_interval = interval;
    manifest.resolved.model_spec = Some(cfg.model.spec(prepared.train.n_channels()));
    let trained = train_model(cfg, &prepared.train, interval)?;
    manifest.stages_completed.push(Stage::Init);
    manifest.stages_completed.push(Stage::Train);
    manifest.resolved.rollout_initial_state = Some(trained.initial_state.clone());

    let mut meta = BTreeMap::new();
    if let Some(stats) = &prepared.stats {
        meta.insert("standardization".to_string(), serde_json::to_value(stats).expect("stats serialize"));
    }
    meta.insert("training_method".to_string(), serde_json::Value::from(trained.log.method.clone()));
    let checkpoint = Checkpoint::from_model(&trained.model, &trained.observation, cfg.seed_for("init"), meta);
    let json = checkpoint.to_json().stage(Stage::Write)?;
    crate::artifacts::write_atomic(&dir.join(MODEL_FILE), |w| {
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")
    })
    .stage(Stage::Write)?;
    manifest.record_artifact(MODEL_FILE);
    write_json(&dir.join(TRAIN_LOG_FILE), &trained.log).stage(Stage::Write)?;
    manifest.record_artifact(TRAIN_LOG_FILE);
    manifest.save(dir)?;
    if last == Stage::Train {
        return Ok(None);
    }

    let t_start = prepared.train.time(prepared.train.len() - 1) + dt;
    let (latent, generated) = rollout(
        &trained.model,
        &trained.observation,
        &trained.initial_state,
        cfg.rollout.n_steps,
        dt,
        t_start,
    )
    .stage(Stage::Rollout)?;
    export_csv(&generated, &dir.join(ROLLOUT_FILE)).stage(Stage::Write)?;
    manifest.record_artifact(ROLLOUT_FILE);
    manifest.stages_completed.push(Stage::Rollout);
    manifest.save(dir)?;
    if last == Stage::Rollout {
        return Ok(None);
    }

    let mut mcfg = cfg.measures.clone();
    mcfg.seed = cfg.seed_for("measures");
    let offset = prepared.embedding.map_or(0, |(_, s)| s.span());
    let mut report = measure(
        &trained.model,
        &latent,
        &generated,
        &prepared.train,
        &prepared.test,
        offset,
        dt,
        &mcfg,
    )
    .stage(Stage::Measure)?;
    report.provenance.seeds.extend(manifest.seeds.clone());
    write_json(&dir.join(REPORT_FILE), &report).stage(Stage::Write)?;
    manifest.record_artifact(REPORT_FILE);
    manifest.stages_completed.push(Stage::Measure);
    Ok(Some(report))
}
