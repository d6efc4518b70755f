//! Error type shared by every module of the laboratory.

use thiserror::Error;

/// Failures reported by geometry, special functions, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The Gamma function was evaluated at a non-positive integer.
    #[error("pole of the Gamma function at x = {0}")]
    Pole(f64),
    /// Geometry with (numerically) zero area or invalid loops.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    /// A series or iteration failed to converge within its budget.
    #[error("no convergence: {0}")]
    NonConvergence(String),
    /// A linear solve did not reach the requested residual.
    #[error("linear solver: {0}")]
    Solver(String),
    /// The discretization is too coarse to resolve the requested quantity.
    #[error("discretization: {0}")]
    Discretization(String),
    /// Level-set extraction failed.
    #[error("contour extraction: {0}")]
    Contour(String),
    /// Malformed input file or field.
    #[error("format: {0}")]
    Format(String),
    /// Underlying I/O failure.
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
