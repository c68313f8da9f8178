use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite values: {0}")]
    NonFinite(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("stabilizer undefined: <N(Q),Q> = {0} is not positive")]
    StabilizerUndefined(f64),
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
