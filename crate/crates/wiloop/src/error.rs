use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A problem tied to one line of a config file.
    #[error("{}:{line}: {message}", path.display())]
    Config { path: PathBuf, line: usize, message: String },

    /// The file parsed but the resulting scenario is invalid.
    #[error("{}: {source}", path.display())]
    Invalid { path: PathBuf, source: wiloop_core::Error },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] wiloop_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 1 for I/O failures, 2 for anything the user can fix in the inputs.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
