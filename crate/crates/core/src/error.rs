use thiserror::Error;

/// Errors produced by space validation, the solvers and the bound routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distance matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("distance matrix is asymmetric at ({i}, {j}): {a} vs {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("nonzero diagonal entry {value} at index {i}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("negative distance {value} at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("negative weight {value} at index {i}")]
    NegativeWeight { i: usize, value: f64 },
    #[error("triangle inequality violated: d({i},{k}) > d({i},{j}) + d({j},{k})")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("feature matrix has {found} rows, expected {expected}")]
    FeatureRowMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sliced bounds require p = 2, got p = {0}")]
    UnsupportedOrder(f64),
    #[error("refused: {0}")]
    Refused(String),
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("parse error at line {line}, field {field}: {msg}")]
    Parse { line: usize, field: usize, msg: String },
    #[error("I/O error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for the variants that stem from malformed input data.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonConvergence { .. } | Error::Io { .. }
        )
    }
}
