use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical library and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("direction psi = {psi} is not a multiple of pi/{n_theta}")]
    AxisNotGridAligned { psi: f64, n_theta: usize },

    #[error("incompatible symmetry: {0}")]
    IncompatibleSymmetry(String),

    #[error("field does not match mask: {0}")]
    MaskMismatch(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("exponential overflow: |s| = {0} exceeds the safe range")]
    Overflow(f64),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("linear solve broke down at pivot {0}: singular Jacobian")]
    SingularJacobian(usize),

    #[error("Newton iteration diverged: {0}")]
    Diverged(String),

    #[error("shooting could not bracket {target} interior zeros: {detail}")]
    NoBracket { target: usize, detail: String },

    #[error("sign component collapsed during nodal descent ({0})")]
    CollapsedSign(&'static str),

    #[error("field is not {k}-invariant (defect {defect:.3e})")]
    NotKInvariant { k: usize, defect: f64 },

    #[error("k-invariant Morse index is {found}, expected {expected}")]
    IndexMismatch { expected: usize, found: usize },

    #[error("sector eigenfunction overlap with the first eigenfunction is not positive at psi = {psi} ({value:.3e})")]
    NonpositiveOverlap { psi: f64, value: f64 },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("format error in field `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("truncated payload {path:?}: expected {expected} bytes, found {found}")]
    TruncatedPayload { path: PathBuf, expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    pub fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format { field: field.into(), message: message.into() }
    }

    /// True for errors caused by the scenario rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
