use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pipeline stage an error is attributed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Data,
    Split,
    Standardize,
    Embed,
    Init,
    Train,
    Rollout,
    Measure,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Data => "data",
            Self::Split => "split",
            Self::Standardize => "standardize",
            Self::Embed => "embed",
            Self::Init => "init",
            Self::Train => "train",
            Self::Rollout => "rollout",
            Self::Measure => "measure",
            Self::Write => "write",
        })
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        path: String,
        line: u64,
        column: Option<usize>,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<HarnessError>,
    },

    #[error(transparent)]
    Core(#[from] dsr_core::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for invalid input, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } | Self::UnknownScenario(_) => 2,
            Self::Core(dsr_core::Error::InvalidArgument(_)) => 2,
            Self::Stage { source, .. } => source.exit_code(),
            Self::Io { .. } | Self::Core(_) => 1,
        }
    }

    /// The innermost stage label, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Self::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

/// Attaches a stage label to any error convertible into [`HarnessError`].
pub trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<HarnessError>> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| HarnessError::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
