//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated an operation's contract.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Exact order-statistic enumeration exceeds the configured term budget.
    #[error(
        "exact enumeration needs {terms:.3e} terms, over the budget of {budget:.3e}; \
         use the Monte Carlo estimator instead"
    )]
    Infeasible { terms: f64, budget: f64 },

    /// Online rate estimation degenerated to all-zero estimates.
    #[error("all estimated worker rates are zero; cannot assign work")]
    AllRatesZero,

    /// A rates file could not be parsed.
    #[error("rates file {path}, line {line}: {message}")]
    RatesFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit status for the CLI: 2 for invalid input, 1 for runtime failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
