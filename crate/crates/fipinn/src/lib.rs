//! Failure-informed training for physics-informed neural networks.
//!
//! The library trains a fully connected tanh network against a PDE residual
//! and boundary constraints, periodically estimating the probability that
//! the residual still exceeds a tolerance somewhere in the domain. When that
//! failure probability is large, the collocation set is recomposed around
//! the offending region; when it falls below a threshold, training stops.
//!
//! Modules, bottom up:
//! - [`autodiff`]: exact derivatives of the network (inputs and parameters)
//! - [`problems`]: benchmark PDE definitions with closed-form solutions
//! - [`performance`]: pointwise failure indicators built on the residual
//! - [`subsim`]: subset simulation for small failure probabilities
//! - [`anneal`]: resampling schedule, restart rule, set recomposition
//! - [`optim`]: Adam and L-BFGS in flat-parameter form
//! - [`trainer`]: the full training loop and error metrics

pub mod anneal;
pub mod autodiff;
pub mod optim;
pub mod performance;
pub mod problems;
pub mod seed;
pub mod stats;
pub mod subsim;
pub mod trainer;

use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation before any work started.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A point in the problem domain, one coordinate per dimension.
pub type Point = Vec<f64>;
