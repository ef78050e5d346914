use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("geometry or rank mismatch: {0}")]
    Mismatch(String),
    #[error("bidegree ({p},{q}) not valid here: {reason}")]
    Bidegree { p: usize, q: usize, reason: String },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid connection: {0}")]
    Connection(String),
    #[error("gauge transform rejected: {0}")]
    Gauge(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("flow produced non-finite values at step {step}")]
    BlowUp { step: usize },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
