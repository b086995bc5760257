use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown field `{name}`; valid identifiers: {}", valid.join(", "))]
    NotFound { name: String, valid: Vec<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The interface does not separate the sampled domain.
    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: String, index: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn non_finite(context: impl Into<String>, index: usize) -> Self {
        Error::NonFinite {
            context: context.into(),
            index,
        }
    }
}
