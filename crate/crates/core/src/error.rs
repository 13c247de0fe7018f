use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported algebra: series {series} rank {rank}")]
    UnsupportedAlgebra { series: String, rank: usize },

    #[error("invalid parabolic root set: {0}")]
    InvalidParabolic(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("point {point:?} outside chart domain ({reason})")]
    Domain { point: Vec<f64>, reason: String },

    #[error("bivector degenerate at {point:?} (|c| = {coefficient:e})")]
    DegeneratePoint { point: Vec<f64>, coefficient: f64 },

    #[error("{what} = {value} outside admissible range {range}")]
    OutOfRange { what: String, value: f64, range: String },

    #[error("compact basis not populated; call compact_basis first")]
    CompactNotPopulated,
}

pub type Result<T> = std::result::Result<T, Error>;
