use thiserror::Error;

/// Errors raised by the factorization toolkit.
#[derive(Debug, Error)]
pub enum NmfError {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {0} of the coefficient matrix is zero")]
    ZeroColumn(usize),

    #[error("row {0} of the factor is zero")]
    ZeroRow(usize),

    /// The residual vanished before the requested number of picks.
    #[error("rank deficient: only {} of the requested indices could be selected", found.len())]
    RankDeficient { found: Vec<usize> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unbounded polygon: the slice of the simplex is not bounded")]
    Unbounded,

    #[error("vertex {vertex} violates facet {facet} by {violation}")]
    VertexOutside {
        vertex: usize,
        facet: usize,
        violation: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NmfError>;

pub(crate) fn dim_err(op: &'static str, detail: impl Into<String>) -> NmfError {
    NmfError::DimensionMismatch {
        op,
        detail: detail.into(),
    }
}
