use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("image must be at least 1x1, got {width}x{height}")]
    ZeroSize { width: u32, height: u32 },
    #[error("raster length mismatch: expected {expected}, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("mask is {actual:?} but image is {expected:?}")]
    MaskSize { expected: (u32, u32), actual: (u32, u32) },
    #[error("unsupported image format (expected PNG or JPEG)")]
    UnsupportedFormat,
    #[error("image codec: {0}")]
    Codec(String),
    #[error("invalid object region: {0}")]
    BadRegion(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("variable {0} is already bound")]
    DuplicateBinding(String),
    #[error("invalid variable name {0:?} (expected [A-Z][A-Z0-9_]*)")]
    InvalidIdentifier(String),
    #[error("unbound variable {name}{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    UnboundVariable { name: String, step: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed value: {0}")]
    Malformed(String),
    #[error("image {0} not found in store")]
    MissingImage(String),
    #[error(transparent)]
    Image(#[from] ImageErrorString),
}

/// `ImageError` flattened to a string so codec errors stay `Eq`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ImageErrorString(pub String);

impl From<ImageError> for CodecError {
    fn from(e: ImageError) -> Self {
        CodecError::Image(ImageErrorString(e.to_string()))
    }
}
