use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty set has no distance field")]
    EmptySet,
    #[error("geometry mismatch: {0}")]
    Geometry(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate set: supply ambient diameter")]
    DegenerateSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("too few scale buckets: need at least 3, got {0}")]
    TooFewBuckets(usize),
    #[error("inconclusive threshold")]
    InconclusiveThreshold(Box<crate::aikawa::ThresholdTable>),
    #[error("big-piece ball missing: existence guarantee violated at x={x:?}, m={m}")]
    BigPieceMissing { x: Vec<f64>, m: u32 },
    #[error("test function must vanish on F")]
    NonVanishing,
    #[error("no admissible test function: {0}")]
    NoTestFunction(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
