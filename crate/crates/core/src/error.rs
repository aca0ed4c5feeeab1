use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library.
///
/// The variants are grouped by how a caller should react: `Invalid*` and
/// `Regime` are input problems, `NonConvergence` is a numerical failure and
/// `Io`/`Parse` come from reading files.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter regime violated: {0}")]
    Regime(String),

    #[error("space validation failed:\n  - {}", .0.join("\n  - "))]
    InvalidSpace(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unknown point id `{0}`")]
    UnknownPoint(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical non-convergence: {what} (achieved residual {residual:.3e})")]
    NonConvergence { what: String, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }
}
