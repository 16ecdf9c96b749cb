use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid hash family spec: {0}")]
    InvalidSpec(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row {row} out of range for a family with {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("cannot allocate sketch payload of {bytes} bytes")]
    Allocation { bytes: usize },
    #[error("counter overflow in row {row}, bucket {bucket}")]
    CounterOverflow { row: usize, bucket: usize },
    #[error("sketch is empty")]
    EmptySketch,
    #[error("sketch specs differ; only sketches built with identical specs can be merged")]
    SpecMismatch,
    #[error("inconsistent sketch payload: {0}")]
    CorruptSketch(&'static str),
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value {value} for id {id:?}")]
    NonFinite { id: String, value: f64 },
    #[error("mixed scorer ids: {first:?} and {other:?}")]
    MixedScorer { first: String, other: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("sample size {k} exceeds population {n}")]
    SampleTooLarge { k: usize, n: usize },
    #[error("sample size must be at least 1")]
    ZeroSample,
    #[error("score {value} for id {id:?} must be positive for inverse-propensity sampling")]
    NonPositiveScore { id: String, value: f64 },
    #[error("score sets do not cover the same ids")]
    IdMismatch,
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("rank correlation undefined: all values tied")]
    AllTied,
    #[error("prompt template has no {0:?} placeholder")]
    MissingPlaceholder(String),
    #[error("example {0:?} has no text to score")]
    EmptyText(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}
