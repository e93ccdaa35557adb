use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{users} users exceeds the limit of {limit} for {what}")]
    TooManyUsers {
        users: usize,
        limit: usize,
        what: &'static str,
    },

    /// A continuous density was required but the fading law has an atom.
    #[error("user {user}: {reason}")]
    Continuity { user: usize, reason: String },

    #[error("per-state objective unbounded: user {user} has zero price and positive gain")]
    Unbounded { user: usize },

    #[error("{what} did not converge after {iterations} iterations (residuals {residuals:?})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),
}

pub(crate) fn ensure_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(format!($($arg)*))
    };
}
pub(crate) use domain;
