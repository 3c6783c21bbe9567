use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] bifi_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type ExpResult<T> = std::result::Result<T, ExpError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> ExpError {
    let path = path.into();
    move |source| ExpError::Io { path, source }
}
