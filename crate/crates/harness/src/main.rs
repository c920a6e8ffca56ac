use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsr_core::measures::{EvalReport, MeasureConfig};
use dsr_harness::artifacts::{write_json, Manifest, MANIFEST_FILE};
use dsr_harness::config::{apply_override, validate_measure_config, ExperimentConfig, EXPERIMENT_SCHEMA};
use dsr_harness::error::StageContext;
use dsr_harness::ingest::{export_csv, ingest_csv};
use dsr_harness::pipeline::{load_data, prepare, run_until, split};
use dsr_harness::{scenario, HarnessError, Result, ScenarioName, Stage};

/// Dynamical systems reconstruction experiments.
#[derive(Parser)]
#[command(name = "dsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or load the configured data and write it as CSV.
    Simulate {
        #[command(flatten)]
        source: ConfigSource,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Select the delay embedding on the training split and write the
    /// embedded train and test series.
    Embed {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline through training (writes model.json).
    Train(RunArgs),
    /// Run the pipeline through the free roll-out (writes rollout.csv).
    Rollout(RunArgs),
    /// Score a generated trajectory against a reference trajectory.
    Measure {
        /// Reference (held-out) CSV.
        #[arg(long)]
        truth: PathBuf,
        /// Generated CSV.
        #[arg(long)]
        generated: PathBuf,
        /// Training CSV; enables forecast scores.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Sampling interval for headerless CSV files.
        #[arg(long)]
        dt: Option<f64>,
        /// TOML or JSON file holding measure settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline (writes manifest, model, roll-out and report).
    Run(RunArgs),
    /// Write a reference scenario bundle.
    Scenario {
        /// bistable_neuron, n_tipping, b_tipping or lorenz_noisy.
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the experiment config JSON schema.
    Schema,
}

#[derive(Args)]
struct ConfigSource {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    config: Option<PathBuf>,
    /// Rerun the config recorded in a run manifest (or its directory).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Override a config entry, e.g. `--set data.n_steps=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Run directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.manifest) {
            (Some(path), _) => ExperimentConfig::load_with_overrides(path, &self.overrides),
            (None, Some(path)) => {
                let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.clone() };
                let manifest = Manifest::load(&path)?;
                let mut value = manifest.config.to_json_value();
                for o in &self.overrides {
                    apply_override(&mut value, o)?;
                }
                ExperimentConfig::from_json_value(value, None)
            }
            (None, None) => Err(HarnessError::config("either --config or --manifest is required")),
        }
    }
}

fn output_dir(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> Result<PathBuf> {
    out.clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| HarnessError::config("no output directory: pass --out or set output_dir"))
}

fn run_stage(args: &RunArgs, last: Stage) -> Result<()> {
    let cfg = args.source.load()?;
    let dir = output_dir(&cfg, &args.out)?;
    let outcome = run_until(&cfg, &dir, last)?;
    let mut summary = serde_json::json!({
        "dir": outcome.dir,
        "status": outcome.manifest.status,
        "artifacts": outcome.manifest.artifacts,
    });
    if let Some(r) = &outcome.report {
        let mut scores = serde_json::to_value(r).expect("report serializes");
        scores.as_object_mut().expect("report is an object").remove("provenance");
        summary["report"] = scores;
    }
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn simulate_cmd(source: &ConfigSource, out: &Path) -> Result<()> {
    let cfg = source.load()?;
    let data = load_data(&cfg).stage(Stage::Data)?;
    export_csv(&data.observed, out)
}

fn embed_cmd(source: &ConfigSource, out: &Path) -> Result<()> {
    let cfg = source.load()?;
    if cfg.embedding.is_none() {
        return Err(HarnessError::config("config has no [embedding] table"));
    }
    let data = load_data(&cfg).stage(Stage::Data)?;
    let (train, test) = split(&data.observed, &cfg.split).stage(Stage::Split)?;
    let prepared = prepare(&cfg, &train, &test)?;
    let (channel, spec) = prepared.embedding.expect("embedding configured");
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    export_csv(&prepared.train, &out.join("embedded_train.csv"))?;
    export_csv(&prepared.test, &out.join("embedded_test.csv"))?;
    let resolved = serde_json::json!({
        "channel": channel,
        "dimension": spec.dimension,
        "lag": spec.lag,
        "standardization": prepared.stats,
    });
    write_json(&out.join("embedding.json"), &resolved)?;
    println!("{}", serde_json::to_string_pretty(&resolved).expect("json serializes"));
    Ok(())
}

fn measure_cmd(
    truth: &Path,
    generated: &Path,
    train: Option<&Path>,
    dt: Option<f64>,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mcfg = match config {
        Some(path) => {
            let value = dsr_harness::config::load_value(path)?;
            validate_measure_config(&value)?;
            let mcfg: MeasureConfig = serde_json::from_value(value).map_err(|e| HarnessError::config(e.to_string()))?;
            mcfg.validate()?;
            mcfg
        }
        None => MeasureConfig::default(),
    };
    let truth = ingest_csv(truth, dt)?;
    let generated = ingest_csv(generated, dt)?;
    let mut report = EvalReport::long_term(&truth, &generated, &mcfg).stage(Stage::Measure)?;
    if let Some(train) = train {
        let train = ingest_csv(train, dt)?;
        let n = truth.len().min(generated.len());
        report
            .add_forecast(&truth.slice(0..n)?, &generated.slice(0..n)?, &train, &mcfg)
            .stage(Stage::Measure)?;
    }
    write_json(out, &report)
}

fn scenario_cmd(name: &str, seed: u64, out: &Path) -> Result<()> {
    let name: ScenarioName = name.parse()?;
    let bundle = scenario(name, seed)?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    bundle.write(out)?;
    println!("{name}: {} traces written to {}", bundle.traces.len(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { source, out } => simulate_cmd(&source, &out),
        Command::Embed { source, out } => embed_cmd(&source, &out),
        Command::Train(args) => run_stage(&args, Stage::Train),
        Command::Rollout(args) => run_stage(&args, Stage::Rollout),
        Command::Run(args) => run_stage(&args, Stage::Measure),
        Command::Measure {
            truth,
            generated,
            train,
            dt,
            config,
            out,
        } => measure_cmd(&truth, &generated, train.as_deref(), dt, config.as_deref(), &out),
        Command::Scenario { name, seed, out } => scenario_cmd(&name, seed, &out),
        Command::Schema => {
            print!("{EXPERIMENT_SCHEMA}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
