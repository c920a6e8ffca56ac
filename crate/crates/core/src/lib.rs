//! Dynamical systems reconstruction workbench.
//!
//! Ground-truth simulators ([`dynsys`]), delay embedding ([`embedding`]),
//! piecewise-linear and reservoir surrogate models ([`models`]), DSR
//! training with sparse/generalized teacher forcing, multiple shooting and
//! ridge regression ([`training`]), and long-term evaluation measures
//! ([`measures`]).
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod dynsys;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod measures;
pub mod models;
pub mod scalar;
pub mod trajectory;
pub mod training;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use scalar::Scalar;
pub use trajectory::Trajectory;

pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type Mat64 = Mat<f64>;
pub type System64 = dynsys::System<f64>;
