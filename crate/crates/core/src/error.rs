use thiserror::Error;

/// Errors raised by the simulators, models, training routines and measures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{context}: series too short (need at least {needed} samples, got {got})")]
    TooShort {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("state diverged at step {step}")]
    Diverged { step: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{0}: series is constant")]
    ConstantSeries(&'static str),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("normal matrix is ill-conditioned (condition number {condition:.3e}); increase the ridge penalty")]
    IllConditioned { condition: f64 },

    #[error("tangent space collapsed at step {step}")]
    TangentCollapse { step: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("{dims}-dimensional data is too high for binning; use the GMM estimator")]
    TooManyDimensions { dims: usize },

    #[error("training diverged after {epochs} epochs with non-finite loss or gradient (last loss {last_loss})")]
    TrainingDiverged { epochs: usize, last_loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
