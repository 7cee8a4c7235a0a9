use alloc::string::String;

/// Errors produced by the CPI core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{field} {reason}")]
    InvalidConfig {
        field: &'static str,
        reason: &'static str,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no mask at depth {0} mm")]
    UnknownDepth(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("payload kind mismatch")]
    PayloadMismatch,
    #[error("need at least {needed} frames, have {have}")]
    NotEnoughFrames { needed: u64, have: u64 },
    #[error("speckle undersampled: sigma_c {sigma_c} um is below the grid pitch {pitch} um")]
    Undersampled { sigma_c: f64, pitch: f64 },
    #[error("pixel {index} has invalid analog value {value}")]
    InvalidIntensity { index: usize, value: f64 },
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("fewer than two peaks in profile")]
    NoPeaks,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("all ray measurements are masked")]
    AllMasked,
    #[error("degenerate zero-length ray")]
    DegenerateRay,
    #[error("analytic correlation needs a single-depth scene, got {0} masks")]
    MultiDepth(usize),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

pub type Result<T> = core::result::Result<T, Error>;
