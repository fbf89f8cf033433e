use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length error: {0}")]
    Length(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("npy format error: {0}")]
    Format(String),

    #[error("unsupported npy dtype `{0}` (supported: <f4, <f8, <i4, |u1)")]
    DType(String),

    #[error("config schema error at `{key}`: {message}")]
    Schema { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate sensor model: {0}")]
    DegenerateSensor(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid structuring element {0}x{1}: dimensions must be odd and >= 1")]
    Kernel(usize, usize),

    #[error("repair mask overlaps {0} valid pixel(s)")]
    MaskOverlap(usize),

    #[error("no valid pixel to copy from")]
    NoValidPixel,

    #[error("probabilities not normalized at pixel ({v}, {u}): sum = {sum}")]
    NotNormalized { v: usize, u: usize, sum: f64 },

    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),

    #[error("every pixel carries the ignore label")]
    AllIgnored,

    #[error("class id {id} out of range for {num_classes} classes")]
    ClassRange { id: u32, num_classes: usize },

    #[error("confusion matrix holds no scored samples")]
    EmptyMatrix,

    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            key: key.into(),
            message: message.into(),
        }
    }
}
