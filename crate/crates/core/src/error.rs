use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Physics,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed MPS structure: {0}")]
    Structure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: {left} vs {right} sites")]
    LengthMismatch { left: usize, right: usize },
    #[error("dense conversion refused: {len} sites exceeds the oracle limit of {limit}")]
    OracleLimit { len: usize, limit: usize },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: String, detail: String },
    #[error("norm floor breached at t = {t}: norm^2 = {norm_sq:.6e} < {floor}")]
    NormFloor { t: f64, norm_sq: f64, floor: f64 },
    #[error("window error: {0}")]
    Window(String),
    #[error("unclassifiable excitation: {0}")]
    Unclassifiable(String),
    #[error("channel isolation failed: {0}")]
    Isolation(String),
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::LengthMismatch { .. } => {
                ErrorClass::Validation
            }
            Error::Window(_) | Error::Unclassifiable(_) | Error::Isolation(_) => ErrorClass::Physics,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Format(_) => ErrorClass::Io,
            _ => ErrorClass::Numerical,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<ndarray::ShapeError> for Error {
    fn from(e: ndarray::ShapeError) -> Self {
        Error::Structure(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
