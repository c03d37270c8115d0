use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the physical or mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A time-tag sequence is not sorted; `index` is the first offending record.
    #[error("time tags not sorted: record {index} ({value} ps) precedes its predecessor ({previous} ps)")]
    Unsorted { index: usize, previous: u64, value: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit setup error: {0}")]
    Fit(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
