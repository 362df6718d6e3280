use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("matrix is ill-conditioned (estimated condition number {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("2x2 theta block is singular (det = {det:.3e})")]
    SingularTheta { det: f64 },
    #[error("exhaustive sparse spectral norm supports dim <= {max}, got {dim}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {required} samples, got {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("need at least {required} variables, got {found}")]
    TooFewVariables { required: usize, found: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("Cholesky factorization failed: correlation matrix is not positive definite")]
    CholeskyFailure,
    #[error("contamination rate {0} is outside (0, 1)")]
    RateOutOfRange(f64),
    #[error("tail indicator for column {column} is constant")]
    DegenerateIndicator { column: usize },
    #[error("coefficient diagonal entry {index} is {value:.3e}, expected a unit diagonal")]
    NonUnitDiagonal { index: usize, value: f64 },
    #[error("l1 norm {norm:.3e} of the iterate exceeds the radius {radius:.3e}")]
    RadiusExceeded { norm: f64, radius: f64 },
    #[error("column {0} is constant")]
    ConstantColumn(usize),
    #[error("estimated variance is zero")]
    ZeroVariance,
    #[error("pseudo-score denominator {0:.3e} is numerically zero")]
    DegenerateDenominator(f64),
    #[error("need {required} rows for the subsample protocol, only {available} available")]
    InsufficientRows { required: usize, available: usize },
    #[error("node index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("node pair must have a != b (got {0})")]
    SameNode(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed data: {0}")]
    Data(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl Error {
    /// Process exit status: 2 for configuration problems, 3 for bad input
    /// data, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::RateOutOfRange(_) => 2,
            Error::Data(_)
            | Error::Io(_)
            | Error::DimensionMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::TooFewSamples { .. }
            | Error::TooFewVariables { .. }
            | Error::ConstantColumn(_)
            | Error::DegenerateIndicator { .. }
            | Error::InsufficientRows { .. }
            | Error::IndexOutOfRange { .. }
            | Error::SameNode(_) => 3,
            _ => 4,
        }
    }
}
