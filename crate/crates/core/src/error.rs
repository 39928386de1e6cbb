use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("abscissae are not strictly increasing at index {0}")]
    NotStrictlyIncreasing(usize),
    #[error("signal has a negative value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("signal is not normalized (mass {0}); pass normalize=true to rescale")]
    NotNormalized(f64),
    #[error("signal has zero mass")]
    ZeroMass,
    #[error("transport map is degenerate (constant), inverse density is singular")]
    SingularTransport,
    #[error("transport component is not non-decreasing at index {0}")]
    NonMonotone(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("circle placement infeasible after {0} attempts")]
    InfeasiblePlacement(usize),
    #[error("class {0} has no samples")]
    EmptyClass(i64),
    #[error("label {0} is not known to the model")]
    UnknownLabel(i64),
    #[error("no samples given")]
    EmptySamples,
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("manifest {path}, row {row}: {msg}")]
    Manifest {
        path: PathBuf,
        row: usize,
        msg: String,
    },
    #[error("basis for class {0} is not orthonormal")]
    NotOrthonormal(i64),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SingularTransport | Error::NotOrthonormal(_) => ErrorKind::Numerical,
            Error::InvalidParameter(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
