use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("packing target unreachable: placed {placed} of {target} discs after {attempts} consecutive failed insertions")]
    SaturationUnreachable {
        placed: usize,
        target: usize,
        attempts: u64,
    },

    #[error("disc growth stalled at packing fraction {reached:.6} (target {target:.6})")]
    GrowthStalled { reached: f64, target: f64 },

    #[error("perturbation kind {0} is not supported here")]
    UnsupportedPerturbation(&'static str),

    #[error("shift perturbation requires a periodic mask")]
    NonPeriodicShift,

    #[error("challenge size M={0} must be even and at least 2")]
    OddM(usize),

    #[error("cannot flip {requested} of {available} challenge pixels")]
    TooManyFlips { requested: usize, available: usize },

    #[error("grid pitch {pitch_nm} nm x {grid} cells does not cover mask side {side_um} um")]
    PitchMismatch {
        pitch_nm: f64,
        grid: usize,
        side_um: f64,
    },

    #[error("grid size {grid} is not divisible by challenge size {m}")]
    DivisibilityError { grid: usize, m: usize },

    #[error("detector window does not fit the field: {0}")]
    WindowOutOfBounds(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("need at least {required} samples, got {got}")]
    InsufficientSample { required: usize, got: usize },

    #[error("key length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {required} keys, got {got}")]
    InsufficientKeys { required: usize, got: usize },

    #[error("degenerate FHD sample (zero spread); degrees of freedom undefined")]
    DegenerateSample,

    #[error("CRP database exhausted")]
    DatabaseExhausted,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
