use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed raster: {reason}")]
    MalformedRaster { path: PathBuf, reason: String },

    #[error("{path}: unsupported bit depth: {detail}")]
    UnsupportedBitDepth { path: PathBuf, detail: String },

    #[error("unknown ground-truth label {value} at pixel {index}{}", fmt_path(.path))]
    UnknownLabel {
        value: u8,
        index: usize,
        path: Option<PathBuf>,
    },

    #[error("invalid mask data: {0}")]
    InvalidMask(String),

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("arity error: {0}")]
    Arity(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("terminal A{index} out of range for a pool of {pool_size}")]
    TerminalOutOfRange { index: usize, pool_size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("evaluation failed at generation {generation}, individual {individual}: {source}")]
    Evaluation {
        generation: usize,
        individual: usize,
        #[source]
        source: Box<Error>,
    },
}

fn fmt_path(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" in {}", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_width: left.0,
            left_height: left.1,
            right_width: right.0,
            right_height: right.1,
        }
    }
}
