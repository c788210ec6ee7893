use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::numerics::QFormat;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fixed-point format: {0}")]
    InvalidFormat(String),

    #[error("fixed-point format mismatch: {0} vs {1}")]
    FormatMismatch(QFormat, QFormat),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: unsupported audio format: {detail}", path.display())]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("parse error at byte {offset}: {detail}")]
    Parse { offset: usize, detail: String },

    #[error("unsupported model version {found} (this build reads version {expected})")]
    Version { found: u16, expected: u16 },

    #[error("manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },

    #[error("clip {clip}: {source}")]
    Clip {
        clip: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_clip(self, clip: impl Into<String>) -> Self {
        Error::Clip {
            clip: clip.into(),
            source: Box::new(self),
        }
    }
}
