//! Crate-wide error type.
//!
//! Observation indices in messages are 1-based; byte offsets into formula
//! strings are 0-based.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Formula text could not be parsed; `offset` is the byte position of the
    /// offending token.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// An identifier in a formula is neither a declared parameter nor an
    /// available covariate.
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    /// Evaluation left the domain of a function (log of a non-positive value,
    /// non-positive base under a parameterized power, non-positive
    /// dispersion). `observation` is 1-based.
    #[error("domain error at observation {observation}: {message}")]
    Domain { observation: usize, message: String },

    /// A caller-supplied argument is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Structurally incompatible shapes or name sets.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Problems with an observation set: non-finite cells, missing columns,
    /// too few rows.
    #[error("data error: {0}")]
    Data(String),

    /// A linear solve or inversion failed.
    #[error("singular matrix in {0}")]
    Singular(String),

    /// The response has no variation, so no dispersion scale can be set.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// An optimization needed by the caller did not converge.
    /// `stage` names which fit failed (e.g. "unrestricted", "restricted").
    #[error("{stage} fit did not converge ({iterations} iterations, best log-likelihood {loglik})")]
    FitFailed {
        stage: String,
        iterations: usize,
        loglik: f64,
    },

    /// A simulation study could not be completed.
    #[error("simulation failure: {0}")]
    Simulation(String),
}
