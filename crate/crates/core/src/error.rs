use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NonSquare { row: usize, len: usize, n: usize },
    #[error("matrix has no rows")]
    Empty,
    #[error("entry ({row}, {col}) is negative or not finite: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} is all zeros and cannot be normalized")]
    ZeroRow { row: usize },
    #[error("row {row} sums to {sum}, outside tolerance of 1")]
    RowSumOutOfTolerance { row: usize, sum: f64 },
    #[error("vector entry {index} is not strictly positive: {value}")]
    NonPositiveEntry { index: usize, value: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("matrix is not column-allowable: column {col} sums to zero")]
    NotColumnAllowable { col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty list of matrices")]
    EmptyList,
    #[error("probability vector is invalid: {0}")]
    InvalidProbabilityVector(String),
    #[error("matrix is not primitive")]
    NotPrimitive,
    #[error("power iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("graph is not irreducible")]
    NotIrreducible,
    #[error("edge ({from}, {to}) is out of range for {n} states")]
    EdgeOutOfRange { from: usize, to: usize, n: usize },
    #[error("decomposition has no transient states")]
    EmptyTransientSet,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("symbol {symbol} at position {position} is outside the alphabet of size {k}")]
    SymbolOutOfRange { symbol: usize, position: usize, k: usize },
    #[error("observation sequence is empty")]
    EmptySequence,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("observation at time {t} has zero probability under every reachable state")]
    ZeroLikelihood { t: usize },
    #[error("time index {t} is outside 1..={len}")]
    TimeOutOfRange { t: usize, len: usize },
    #[error("{kind} topology is incompatible with {n} states")]
    IncompatibleDimensions { kind: String, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}
