use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration, flags or input data.
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// An artifact was written by an incompatible format version.
    #[error("{path}: unsupported {kind} format version {found} (expected {expected})")]
    Version {
        path: PathBuf,
        kind: &'static str,
        found: u32,
        expected: u32,
    },
    #[error(transparent)]
    Core(#[from] smm_core::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } => 2,
            Error::Core(smm_core::Error::Contract(_)) => 2,
            Error::Core(_) => 3,
            Error::Version { .. } => 4,
        }
    }
}
