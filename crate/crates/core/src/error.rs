use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular (|det| = {0:e})")]
    SingularMatrix(f64),
    #[error("matrix is not expansive (min eigenvalue modulus {0})")]
    NotExpansive(f64),
    #[error("principal logarithm unavailable: eigenvalue on the closed negative real axis")]
    LogarithmUnavailable,
    #[error("{what} did not converge after {iterations} iterations")]
    ConvergenceFailure { what: &'static str, iterations: usize },
    #[error("continuous scale requested for the zero vector")]
    ZeroVector,
    #[error("scale profile has zero L2 norm")]
    ProfileDegenerate,
    #[error("coverage gap: uncovered share {0:e}")]
    CoverageGap(f64),
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("ball range is empty (j_min = {0}, j_max = {1})")]
    EmptyBallRange(i32, i32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("brute-force supremum kept growing past box level {0}")]
    NonConvergent(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
