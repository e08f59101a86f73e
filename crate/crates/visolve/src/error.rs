use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("libsvm line {line}: {reason}")]
    Libsvm { line: usize, reason: String },
    #[error("pgm: {0}")]
    Pgm(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] visolve_core::Error),
    #[error("fetch: {0}")]
    Fetch(String),
    #[error("checksum mismatch for {path}: expected {expected}, got {got}")]
    Checksum {
        path: PathBuf,
        expected: String,
        got: String,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("plot data: {0}")]
    PlotData(String),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
