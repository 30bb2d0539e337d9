//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical kernels and front end.
#[derive(Error, Debug)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or iteration failed to reach the requested accuracy.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Inconsistent or malformed caller input.
    #[error("input error: {0}")]
    Input(String),

    /// Adaptive ODE integration failed.
    #[error("integration error: {0}")]
    Integration(String),

    /// State violates a physicality constraint (e.g. the uncertainty bound).
    #[error("unphysical state: {0}")]
    Unphysical(String),

    /// An asymptotic formula was requested outside its validity regime.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
