//! Experiment harness: configuration, data ingestion, the end-to-end
//! reconstruction pipeline, run artifacts and reference scenarios.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod scenario;
pub mod simulate;

pub use artifacts::{Manifest, RunStatus};
pub use config::{derive_seed, ExperimentConfig};
pub use error::{HarnessError, Result, Stage};
pub use pipeline::{run_experiment, run_until, RunOutcome};
pub use scenario::{scenario, ScenarioBundle, ScenarioName};
