use std::io;
use std::path::PathBuf;

use crate::client::ClientError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("missing shard {}", .0.display())]
    MissingShard(PathBuf),
    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}:{line}: duplicate id {id:?}", path.display())]
    DuplicateId { path: PathBuf, line: usize, id: String },
    #[error("{}: manifest lists {expected} records, shard holds {found}", path.display())]
    CountMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("{}: dimension {found} does not match manifest dimension {expected}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{}: non-finite component in embedding {id:?}", path.display())]
    NonFinite { path: PathBuf, id: String },
    #[error("{}: truncated file", path.display())]
    Truncated { path: PathBuf },
    #[error("{}: bad magic, expected {expected:?}", path.display())]
    BadMagic { path: PathBuf, expected: &'static str },
    #[error("{}: unsupported format version {version}", path.display())]
    UnsupportedVersion { path: PathBuf, version: u16 },
    #[error(transparent)]
    Core(#[from] curata_core::Error),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{0}")]
    Usage(String),
    #[error("stopped after the configured number of shard units; rerun with --resume")]
    Interrupted,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
