use thiserror::Error;

use crate::tiling::{RefinementStats, TilingTable};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("density returned a non-finite value {value} at x = {x}; declare a mass point there")]
    NonFiniteDensity { x: f64, value: f64 },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("memory budget of {budget} bytes exceeded at level {level} (needs {needed} bytes)")]
    MemoryBudgetExceeded {
        budget: u64,
        needed: u64,
        level: u32,
        /// Last table that fit the budget, with the statistics gathered so far.
        best: Box<TilingTable>,
        history: Vec<RefinementStats>,
    },

    #[error("table format: {0}")]
    Format(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("insufficient samples: {got} < {needed}")]
    InsufficientSamples { got: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable code used as the prefix of CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFiniteDensity { .. } => "E_NONFINITE",
            Error::InvalidTable(_) => "E_INVALID_TABLE",
            Error::QuadratureFailure(_) => "E_QUADRATURE",
            Error::DegenerateDensity(_) => "E_DEGENERATE",
            Error::Parameter(_) => "E_PARAMETER",
            Error::Domain(_) => "E_DOMAIN",
            Error::MemoryBudgetExceeded { .. } => "E_MEMORY",
            Error::Format(_) => "E_FORMAT",
            Error::Internal(_) => "E_INTERNAL",
            Error::InsufficientSamples { .. } => "E_SAMPLES",
            Error::Io(_) => "E_IO",
        }
    }

    pub fn is_format(&self) -> bool {
        matches!(self, Error::Format(_) | Error::Io(_))
    }
}
