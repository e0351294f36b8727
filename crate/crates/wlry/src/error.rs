use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error("configuration key `{key}`: {reason}")]
    Key { key: String, reason: String },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("ledger file: {0}")]
    Csv(String),
    #[error(transparent)]
    Core(#[from] wlry_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}
