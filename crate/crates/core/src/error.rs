use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported bit depth {depth} in {}", .path.display())]
    UnsupportedBitDepth { path: PathBuf, depth: u8 },

    #[error("unsupported color layout {layout} in {}", .path.display())]
    UnsupportedChannels { path: PathBuf, layout: String },

    #[error("png decode error: {0}")]
    Decode(#[from] png::DecodingError),

    #[error("png encode error: {0}")]
    Encode(#[from] png::EncodingError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("sequence of {len} frames is shorter than one window of {window}")]
    SequenceTooShort { len: usize, window: usize },

    #[error("corrupted window layout: {0}")]
    CorruptLayout(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest schema error: {0}")]
    Schema(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
