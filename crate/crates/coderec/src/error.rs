use thiserror::Error;

/// Crate-wide error type.
///
/// Variants mirror the stages a recognition run can fail in: bad call
/// arguments, code construction, configuration files, binary file formats,
/// training, and metric computation.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument violated a documented precondition.
    #[error("argument: {0}")]
    Argument(String),

    /// A code could not be constructed from its parameters.
    #[error("construction: {0}")]
    Construction(String),

    /// A configuration file or option was invalid.
    #[error("config: {0}")]
    Config(String),

    /// A dataset, weight, or table file was malformed.
    #[error("format: {0}")]
    Format(String),

    /// Training could not proceed (non-finite gradients, empty splits, ...).
    #[error("training: {0}")]
    Training(String),

    /// A requested metric was undefined for the given data.
    #[error("metric: {0}")]
    Metric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
    pub fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }
    pub fn metric(msg: impl Into<String>) -> Self {
        Error::Metric(msg.into())
    }
}
