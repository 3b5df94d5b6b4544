//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix/vector dimensions; names both offending shapes.
    #[error("shape mismatch in {context}: {left} vs {right}")]
    Shape {
        context: &'static str,
        left: String,
        right: String,
    },

    /// Operation called in an invalid order (e.g. backward before forward).
    #[error("invalid state: {0}")]
    State(&'static str),

    /// Bad configuration value.
    #[error("invalid config: {0}")]
    Config(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Network output became non-finite at the given layer.
    #[error("non-finite output at layer {layer}")]
    NonFiniteLayer { layer: usize },

    /// Training loss diverged.
    #[error("training diverged at epoch {epoch} (loss non-finite)")]
    Diverged { epoch: usize },

    /// Metric called outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    // TINR container errors; each failure mode is distinct.
    #[error("bad magic: expected \"TINR\", found {found:02x?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {found} (supported: {supported})")]
    VersionMismatch { found: u16, supported: u16 },

    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("truncated file: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },

    #[error("malformed model file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] ::image::ImageError),
}

impl Error {
    pub(crate) fn shape(context: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::Shape {
            context,
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
