use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// A trajectory or field evaluation produced a non-finite value.
    #[error("simulation fault at step {step}: {reason}")]
    SimulationFault { step: usize, reason: String },

    /// Explicit scheme would be unstable for the requested step.
    #[error("unstable configuration: dt = {dt} exceeds bound {bound}")]
    Unstable { dt: f64, bound: f64 },

    #[error("integrand underflow: {0}")]
    Underflow(String),

    #[error("support violation: p carries mass {mass:e} where q vanishes")]
    SupportViolation { mass: f64 },

    #[error("{path}: line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }

    /// Short machine-readable category, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::SimulationFault { .. } => "simulation_fault",
            Error::Unstable { .. } => "unstable",
            Error::Underflow(_) => "underflow",
            Error::SupportViolation { .. } => "support_violation",
            Error::Parse { .. } => "parse",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
