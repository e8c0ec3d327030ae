use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subject not in frame")]
    SubjectMissing,
    #[error("window not covered by frames: missing t = {0:.1} s")]
    WindowNotCovered(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("vehicles overlapping")]
    VehiclesOverlapping,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model tag mismatch: expected {expected}, got {actual}")]
    TagMismatch { expected: String, actual: String },
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
