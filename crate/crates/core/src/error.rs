use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed channel file: {0}")]
    Syntax(String),

    #[error("channel has no rows")]
    EmptyChannel,

    #[error("row {row} has length {found}, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("negative or non-finite entry {value} at row {row}, column {col}")]
    BadEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 1 (tolerance {tol:e})")]
    RowSum { row: usize, sum: f64, tol: f64 },

    #[error("row {row} sums to zero and cannot be normalized")]
    ZeroRow { row: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("NaN in input")]
    NaN,

    #[error("negative entry {0}")]
    NegativeEntry(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ratio undefined at p = {p}, q = {q}: input divergence is {input}")]
    UndefinedRatio { p: f64, q: f64, input: f64 },

    #[error("{0} has no curvature at 1; the diagonal limit is undefined")]
    UndefinedCurvature(&'static str),

    #[error("pair is not admissible: {0}")]
    InvalidPair(String),

    #[error("no envelope points inside the window d_in <= {0}")]
    EmptyEnvelope(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
