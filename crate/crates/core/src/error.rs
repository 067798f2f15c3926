use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({:.6}, {:.6}, {:.6}) lies outside the field domain", .0[0], .0[1], .0[2])]
    Domain([f64; 3]),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value encountered in {0}")]
    Numeric(String),

    #[error("degenerate transform at vertex {vertex} (determinant {det:e})")]
    Degenerate { vertex: usize, det: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("transport error talking to {endpoint} after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("training failed at step {step}: {message}")]
    Training { step: usize, message: String },

    #[error("invalid file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

pub(crate) fn shape_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
