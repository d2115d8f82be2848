//! Error taxonomy for the crate.
//!
//! Every fallible operation returns [`Error`]. The variants separate the
//! three failure classes that callers treat differently:
//!
//! * **Configuration problems** (`Config`, `Io`, `Csv`) — the input was
//!   malformed before any numerics ran. The CLI maps these to exit code 1.
//! * **Geometric degeneracy** (`DomainViolation`, `AssumptionViolation`) —
//!   the polygonal curve left the region where the metric or the scheme is
//!   defined. A time-stepping loop reports these as an *abort*, keeping the
//!   partial trajectory.
//! * **Linear-algebra failure** (`SolverFailure`) — the implicit system was
//!   numerically singular or the computed solution failed its residual
//!   check. Also an abort condition.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run configuration (bad field values, inconsistent options).
    #[error("configuration error: {0}")]
    Config(String),

    /// A curve vertex left the coordinate domain of the metric, or a metric
    /// quantity was evaluated at a point where it is undefined.
    #[error("point ({x}, {y}) is outside the metric domain: {reason}")]
    DomainViolation {
        /// First coordinate of the offending point.
        x: f64,
        /// Second coordinate of the offending point.
        y: f64,
        /// Which constraint was violated.
        reason: String,
    },

    /// The polygonal curve violates a structural assumption the schemes
    /// rely on (distinct neighbouring vertices, plane-spanning vertex
    /// normals, or plane-spanning weighted normals).
    #[error("degenerate curve: {0}")]
    AssumptionViolation(String),

    /// The implicit linear system could not be solved reliably.
    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    /// Underlying I/O failure while reading or writing run artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV input.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed JSON configuration.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate a *run-time* breakdown of the flow
    /// (as opposed to malformed input). These turn a run into an abort
    /// rather than a hard usage error.
    pub fn is_abort(&self) -> bool {
        matches!(
            self,
            Error::DomainViolation { .. }
                | Error::AssumptionViolation(_)
                | Error::SolverFailure(_)
        )
    }
}
