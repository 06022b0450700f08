use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("constraint violated: {0}")]
    ConstraintViolated(String),

    #[error("divergent tail integral: c^2 = b*r makes the Huber normalization undefined")]
    DivergentTail,

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("cluster {0} covariance is degenerate after jitter repair")]
    DegenerateCluster(usize),

    #[error("cluster {cluster} collapsed (responsibility mass {mass:e}) and reseeding was exhausted")]
    ClusterCollapse { cluster: usize, mass: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cluster {0} received no points under hard assignment")]
    EmptyCluster(usize),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("undefined density: {0}")]
    UndefinedDensity(String),

    #[error("too many classes for exhaustive matching: {0} > 8")]
    TooManyClasses(usize),

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("invalid configuration: {0}")]
    Config(String),
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
