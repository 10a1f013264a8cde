use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid tensor product: {}", .0.join("; "))]
    InvalidInstructions(Vec<String>),

    #[error("formula forces zero tensor")]
    ZeroTensor,

    #[error("{0}")]
    Precondition(String),

    #[error("equivariance residual {residual:.3e} exceeds tolerance {tol:.3e} (worst element: {worst})")]
    NotEquivariant { residual: f64, tol: f64, worst: String },
}

impl Error {
    pub(crate) fn parse(pos: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            pos,
            msg: msg.into(),
        }
    }
}
