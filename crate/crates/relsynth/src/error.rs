use std::path::PathBuf;

use relsynth_core::ValidationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}:{column}: {message}", file.display())]
    Parse { file: PathBuf, line: u64, column: u64, message: String },
    #[error("dataset failed validation:\n{0}")]
    ValidationFailed(ValidationReport),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint {}: {message}", path.display())]
    CorruptCheckpoint { path: PathBuf, message: String },
    #[error("missing required setting `{0}` (flag or config file)")]
    MissingSetting(&'static str),
    #[error(transparent)]
    Core(#[from] relsynth_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit status: 2 for file-system and checkpoint-format
    /// failures, 1 for everything wrong with the data or settings.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::FileNotFound(_) | Error::Io { .. } | Error::CorruptCheckpoint { .. } => 2,
            _ => 1,
        }
    }
}
