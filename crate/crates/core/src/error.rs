use thiserror::Error;

/// Errors shared across the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("channel mismatch: expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("convolution output extent would be non-positive ({h}x{w})")]
    EmptyOutput { h: i64, w: i64 },

    #[error("spatial dimensions must be even, got {h}x{w}")]
    OddDimension { h: usize, w: usize },

    #[error("anchor and prediction lists differ in length ({anchors} vs {preds})")]
    LengthMismatch { anchors: usize, preds: usize },

    #[error("non-smooth point: {0}")]
    NonSmoothPoint(&'static str),

    #[error("empty region: box does not intersect the feature grid")]
    EmptyRegion,

    #[error("degenerate scene: objective is flat, no shift can be recovered")]
    DegenerateScene,

    #[error("scene generation failed: {0}")]
    SceneGeneration(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad FMAP container: {0}")]
    BadFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
