use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("behind-camera: point has non-positive depth {depth}")]
    BehindCamera { depth: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stack-shape: expected {expected} pattern pairs, got {actual}")]
    StackShape { expected: usize, actual: usize },
    #[error("rank-deficient point configuration")]
    RankDeficient,
    #[error("degenerate-landmarks: {0}")]
    DegenerateLandmarks(String),
    #[error("need at least {required} correspondences, got {actual}")]
    TooFewPoints { required: usize, actual: usize },
    #[error("out-of-range: desired luminance {desired} outside [0, {max}]")]
    OutOfRange { desired: f64, max: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsolvable: {0}")]
    Unsolvable(String),
    #[error("zero-brightness reference")]
    ZeroBrightness,
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("footprint overflow: row {row} holds {count} entries, cap is {cap}")]
    FootprintOverflow { row: usize, count: usize, cap: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
