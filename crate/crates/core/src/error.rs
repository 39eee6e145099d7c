use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("stale frame: seq {seq} is not newer than {last}")]
    StaleFrame { seq: u64, last: u64 },

    #[error("no stabilizing gains found for a {cycle_ms} ms cycle")]
    TuningFailure { cycle_ms: f64 },

    #[error("unknown parameter path `{0}`")]
    UnknownParameter(String),

    #[error("empty trace")]
    EmptyTrace,
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
