use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes of traces, parameters or datasets disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A configuration field violates its constraint.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    /// Non-finite loss or gradient during training.
    #[error("training diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
