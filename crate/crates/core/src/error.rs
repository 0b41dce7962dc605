use thiserror::Error;

/// Errors raised by the library. Every variant carries enough text to be
/// printed as the reason code of a degenerate trial.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("degenerate Woodbury scalars: s^2 - ru = {0:e}")]
    DegenerateScalars(f64),
    #[error("Neumann series diverges: ||T|| estimated at {0:.6}")]
    DivergentSeries(f64),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("dimension too small: {0}")]
    DimensionTooSmall(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("unknown shape `{name}`; catalog: {catalog}")]
    UnknownShape { name: String, catalog: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SingularMatrix(_) => "singular-matrix",
            Error::DegenerateScalars(_) => "degenerate-scalars",
            Error::DivergentSeries(_) => "divergent-series",
            Error::SizeLimit(_) => "size-limit",
            Error::DimensionTooSmall(_) => "dimension-too-small",
            Error::NonSymmetric(_) => "non-symmetric",
            Error::UnknownShape { .. } => "unknown-shape",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
