use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rectangle {x0},{y0} {w}x{h} exceeds image bounds {width}x{height}")]
    OutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid thresholds: low {low} must not exceed high {high}")]
    InvalidThreshold { low: f64, high: f64 },

    #[error("found {found} tick lines, need at least 2")]
    InsufficientTicks { found: usize },

    #[error("tick gaps are irregular: {consistent} of {gaps} lie near the median")]
    IrregularTicks { gaps: usize, consistent: usize },

    #[error("could not find top and bottom paper edges ({found} horizontal edge runs)")]
    EdgesNotFound { found: usize },

    #[error("invalid scale interval [{t_lo}, {t_hi}): {reason}")]
    InvalidInterval { t_lo: f64, t_hi: f64, reason: String },

    #[error("spectral response needs at least 3 frames, got {0}")]
    TooFewFrames(usize),

    #[error("no lines found")]
    NoLinesFound,

    #[error("calibration required for this measurement")]
    MissingCalibration,

    #[error("patch extent {extent_px} px is below the required {required_px:.1} px (1 cm)")]
    PatchTooSmall { extent_px: usize, required_px: f64 },

    #[error("line position {position} lies outside the image")]
    PositionOutOfBounds { position: f64 },

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("unsupported image format")]
    UnsupportedFormat,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
