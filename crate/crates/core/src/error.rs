//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// The CLI maps [`Error::Input`] and [`Error::Config`] to exit code 2 and
/// everything else to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("step size too large: E = {energy_factor:.3e} <= 0 at delta_beta = {delta_beta}; shrink delta_beta")]
    StepSize { delta_beta: f64, energy_factor: f64 },

    #[error("schedule stalled at beta = {beta_k}: overlap {overlap:.4} at beta_k + alpha = {probe} is below threshold {threshold:.4}")]
    ScheduleStall {
        beta_k: f64,
        probe: f64,
        overlap: f64,
        threshold: f64,
    },

    #[error("expansion certificate failed for d = {d}: max deviation {achieved:.3e} > {target:.3e}")]
    Certification { d: f64, achieved: f64, target: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad user input or configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Input(_) | Error::Config(_) | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
