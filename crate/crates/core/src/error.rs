use thiserror::Error;

/// Shape of a `channels × height × width` tensor.
pub type Dims = (usize, usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame dimensions {height}x{width} are not divisible by 4")]
    NotDivisible { height: usize, width: usize },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: Dims, actual: Dims },

    #[error("channel mismatch: expected {expected} channels, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("rate parameter {0} outside [8, 512]")]
    InvalidRate(f64),

    #[error("diffusion step {step} outside [{min}, {max}]")]
    StepOutOfRange { step: usize, min: usize, max: usize },

    #[error("invalid diffusion schedule: {0}")]
    InvalidSchedule(String),

    #[error("symbol {value} outside alphabet [{min}, {max}]")]
    SymbolOutOfAlphabet { value: i32, min: i32, max: i32 },

    #[error("payload truncated after {consumed} bytes")]
    TruncatedPayload { consumed: usize },

    #[error("frame {display_index} needs reference {needed} which is not in the feature buffer")]
    MissingReference { display_index: usize, needed: usize },

    #[error("invalid GoP configuration: {0}")]
    InvalidGop(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed bitstream: {0}")]
    Format(String),

    #[error("bitstream truncated in frame record {frame_index}")]
    TruncatedStream { frame_index: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
