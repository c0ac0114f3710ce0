use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image error: {0}")]
    Image(String),
    #[error("unsupported dimensions {width}x{height}: need a square power-of-two side of at least 8")]
    UnsupportedDimensions { width: u32, height: u32 },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("statistics layout mismatch")]
    LayoutMismatch,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
