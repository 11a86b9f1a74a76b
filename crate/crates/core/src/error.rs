use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("signal mismatch: missing {missing:?}, extra {extra:?}")]
    SignalMismatch {
        missing: alloc::vec::Vec<String>,
        extra: alloc::vec::Vec<String>,
    },
    #[error("signal `{0}` has no data")]
    EmptySignal(String),
    #[error("requested {requested} but only {available} datapoints available")]
    TooFewPoints { requested: usize, available: usize },
    #[error("subset too small to train: {0} rows (minimum 10)")]
    SubsetTooSmall(usize),
    #[error("voting requires >= 2 classes, found {0}")]
    SingleClass(usize),
    #[error("value {value} outside [0, 1]")]
    OutOfRange { value: f64 },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
