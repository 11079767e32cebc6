use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("value {value} in dimension {dim} is outside the measure support [{lo}, {hi}]")]
    OutsideSupport { value: f64, dim: usize, lo: f64, hi: f64 },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("correlation undefined: marginal probability {0} is degenerate")]
    DegenerateMarginal(f64),

    #[error("negative cone coordinate {value} in dimension {dim}")]
    NegativeCoordinate { value: f64, dim: usize },

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("conditioning on null event: evidence has probability zero")]
    NullEvidence,

    #[error("{count} boxes exceed the inclusion-exclusion cap of {cap}; split the query into smaller unions")]
    TooManyBoxes { count: usize, cap: usize },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("non-finite gradient for concepts {concepts:?}")]
    NonFiniteGradient { concepts: Vec<String> },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },

    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
