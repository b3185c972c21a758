use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("vector set is empty")]
    Empty,
    #[error("data length {len} is not n*d = {n}*{d}")]
    Shape { n: usize, d: usize, len: usize },
    #[error("row {row} is the zero vector")]
    ZeroRow { row: usize },
    #[error("row {row} has norm {norm}, expected 1 within 1e-4")]
    NotUnit { row: usize, norm: f64 },
    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("query dimension {got} does not match dataset dimension {expected}")]
    QueryDimension { expected: usize, got: usize },
    #[error("requested k = {k} must be in 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("graph degree K = {k} must be in 1..={max}")]
    DegreeOutOfRange { k: usize, max: usize },
    #[error("LSH bit count m = {0} must be in 1..=24")]
    BitsOutOfRange(usize),
    #[error("inconsistent index: {0}")]
    Inconsistent(&'static str),
}
