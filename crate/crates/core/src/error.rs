use thiserror::Error;

/// Errors raised by constructions and campaigns.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dyadic level {0} exceeds the exact-arithmetic limit of 40")]
    LevelOverflow(u32),

    #[error("degenerate interval [{lo}, {hi}) has zero measure")]
    DegenerateInterval { lo: f64, hi: f64 },

    #[error("invalid interval [{lo}, {hi})")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("index ({n}, {k}) out of range")]
    OutOfRange { n: u32, k: u64 },

    #[error("allocation exhausted at cell ({n}, {k}): free region too small")]
    AllocationExhausted { n: u32, k: u64 },

    #[error("psi domain error at s = {0}")]
    Domain(f64),

    #[error("growth condition failed: {0}")]
    GrowthFailed(String),

    #[error("depth mismatch: {0}")]
    DepthMismatch(String),

    #[error("layout mismatch between operands")]
    LayoutMismatch,

    #[error("functional support at level {level} exceeds model depth {depth}")]
    SupportExceedsDepth { level: u32, depth: u32 },

    #[error("pair too close: |s - t| = {0} is below the resolution of the truncated model")]
    PairTooClose(f64),

    #[error("points coincide: s = t = {0}")]
    CoincidentPoints(f64),

    #[error("level {0} out of range for this model")]
    LevelOutOfRange(u32),

    #[error("depth insufficient: {0}")]
    DepthInsufficient(String),

    #[error("interval has zero measure")]
    ZeroMeasure,

    #[error("disjointness violated: {0}")]
    DisjointnessViolated(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
