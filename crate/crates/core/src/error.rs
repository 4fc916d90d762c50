use thiserror::Error;

use crate::lpcore::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the model formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} exceeds capacity limit {limit} (got {got})")]
    Capacity {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario generation failed: {0}")]
    Generation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{stage} did not converge after {iterations} iterations (last gap {gap:e})")]
    Convergence {
        stage: &'static str,
        iterations: usize,
        gap: f64,
    },

    /// The linear-program engine returned a non-optimal status where an
    /// optimum was required.
    #[error("linear program in {stage} ended with status {status}")]
    Solver { stage: &'static str, status: String },

    #[error(transparent)]
    Lp(#[from] LpError),
}
