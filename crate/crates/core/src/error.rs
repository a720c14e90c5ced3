use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("plane normal is degenerate (|n| = {0:e})")]
    DegenerateNormal(f64),

    #[error("rectangle {x},{y} {width}x{height} exceeds image bounds {image_width}x{image_height}")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        image_width: usize,
        image_height: usize,
    },

    #[error("image is {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("mask maps to no valid depth points")]
    EmptyCluster,

    #[error("need more than {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("only {found} neighbors within radius, need at least 3")]
    InsufficientNeighbors { found: usize },

    #[error("neighborhood is collinear")]
    DegenerateNeighborhood,

    #[error("invalid radii: small radius {small} must be below large radius {large}")]
    InvalidRadii { small: f64, large: f64 },

    #[error("normal is not unit length (|n| = {0})")]
    NonUnitNormal(f64),

    #[error("matrix is not a proper rotation")]
    NotARotation,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("calibration homography missing from configuration")]
    CalibrationMissing,

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
