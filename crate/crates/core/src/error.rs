use thiserror::Error;

/// Errors raised by the solvers and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence {
        iterations: usize,
        context: &'static str,
    },

    #[error("lambda must be positive and finite, got {0}")]
    BadLambda(f64),

    #[error("x is a numerical zero of the operator (phi(1, x) = {phi_at_one:e})")]
    ZeroResidual { phi_at_one: f64 },

    #[error("gradient vanishes at the current iterate (norm {0:e})")]
    ZeroGradient(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window index must be even and at least 2, got {0}")]
    BadK(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator capability missing: {0}")]
    MissingCapability(&'static str),

    #[error("certificate rejected at iteration {iteration}: {reason}")]
    CertificateRejected { iteration: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
