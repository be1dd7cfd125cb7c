use thiserror::Error;

use crate::grid::CubeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),

    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("kernel evaluated on the diagonal at atom {atom}")]
    Diagonal { atom: usize },

    #[error("level range misses {} cube(s) with nonzero coefficients", .missed.len())]
    IncompleteRange { missed: Vec<CubeId> },

    #[error("empty scan: {0}")]
    EmptyScan(String),

    #[error("need at least {need} values, got {got}")]
    InsufficientRange { got: usize, need: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Range(_) => "RangeError",
            Error::Validation(_) => "ValidationError",
            Error::Dimension { .. } => "DimensionError",
            Error::Parse { .. } => "ParseError",
            Error::Diagonal { .. } => "DiagonalError",
            Error::IncompleteRange { .. } => "IncompleteRangeError",
            Error::EmptyScan(_) => "EmptyScanError",
            Error::InsufficientRange { .. } => "InsufficientRangeError",
            Error::Precondition(_) => "PreconditionError",
            Error::Internal(_) => "InternalError",
            Error::Io(_) => "IoError",
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Parse { .. }
                | Error::Dimension { .. }
                | Error::Range(_)
                | Error::Precondition(_)
                | Error::InsufficientRange { .. }
                | Error::IncompleteRange { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn range(msg: impl Into<String>) -> Error {
    Error::Range(msg.into())
}
