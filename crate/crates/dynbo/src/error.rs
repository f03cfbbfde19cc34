use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed record ({reason})")]
    Record { path: PathBuf, reason: String },
    #[error("{0}")]
    Core(#[from] dynbo_core::Error),
    #[error("no results found in {0}")]
    Empty(PathBuf),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn record(path: &Path, reason: impl Into<String>) -> Self {
        HarnessError::Record { path: path.to_path_buf(), reason: reason.into() }
    }
}
