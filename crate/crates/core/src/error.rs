use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("position {position} m lies outside the grid [{min}, {max}] m")]
    OutOfRange { position: f64, min: f64, max: f64 },

    #[error("kernel composition failed: {0}")]
    Composition(&'static str),

    #[error("pump profile has no nonzero samples")]
    DegenerateSource,

    #[error("normalization failed: {0} vanishes")]
    Normalization(&'static str),

    #[error("value has a non-negligible imaginary part ({imag:e})")]
    NotReal { imag: f64 },

    #[error("coherence magnitude {0} exceeds 1")]
    InvalidCoherence(f64),

    #[error("value {0} lies outside [-1, 1]")]
    OutOfUnitRange(f64),

    #[error("sampling pdf is invalid: {0}")]
    InvalidPdf(&'static str),

    #[error("fit is under-determined: {0}")]
    UnderDetermined(&'static str),

    #[error("coincidence estimate is empty: no accepted pairs")]
    EmptyEstimate,

    #[error("camera model is invalid: {0}")]
    InvalidCamera(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
}
