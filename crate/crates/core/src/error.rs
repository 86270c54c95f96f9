use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("delete of absent point {0:?}")]
    DeleteAbsent(Vec<i64>),
    #[error("coordinate {coord} outside [1, {lambda}]")]
    OutOfRange { coord: i64, lambda: i64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("sketch mismatch: {0}")]
    SketchMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("lsh anchor cap of {cap} scans exhausted; raise the cap")]
    AnchorCapExhausted { cap: u64 },
    #[error("empty input")]
    Empty,
    #[error("malformed sketch blob: {0}")]
    Blob(String),
    #[error("inconsistent decode: {0}")]
    InconsistentDecode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
