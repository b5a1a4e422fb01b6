use thiserror::Error;

/// Errors raised by data handling, problem construction and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("column {0} is constant and cannot be scaled")]
    ConstantColumn(usize),

    #[error("columns {0} and {1} have too few jointly observed rows")]
    InsufficientOverlap(usize, usize),

    #[error("q = {0} is outside [1, 2]")]
    InvalidQ(f64),

    #[error("regularization parameter must be positive, got {0}")]
    InvalidLambda(f64),

    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),

    #[error("response vector is identically zero")]
    ZeroResponse,

    #[error("response is required for regression")]
    MissingResponse,

    #[error("missing values are not supported by {0}")]
    MissingNotSupported(&'static str),

    #[error("residual is exactly zero; the loss subdifferential is degenerate")]
    ExactInterpolation,

    #[error("bisection did not reach tolerance within {0} iterations")]
    ToleranceNotReached(usize),

    #[error("degenerate residual in column {0}")]
    DegenerateResidual(usize),

    #[error("problem too large: {0}")]
    ProblemTooLarge(String),

    #[error("d = {0} is too small for this design (need at least {1})")]
    DimensionTooSmall(usize, usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
