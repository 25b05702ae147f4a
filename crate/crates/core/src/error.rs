use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("pulse clipped by time window: edge amplitude is {ratio:.3e} of peak")]
    PulseClipped { ratio: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("spectral aliasing at z = {z:.4e} m: edge band holds {ratio:.3e} of the spectral peak")]
    SpectralAliasing { z: f64, ratio: f64 },

    #[error("non-finite field samples at z = {z:.4e} m")]
    NumericalBlowup { z: f64 },

    #[error("invalid noise model: {0}")]
    InvalidNoiseModel(String),

    #[error("undefined shot-noise normalization: mean photon number {mean} is not positive")]
    UndefinedNormalization { mean: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("propagation failed at input peak power {power_w} W: {source}")]
    AtPower {
        power_w: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} Monte-Carlo samples failed (last error: {last})")]
    SampleFailures {
        failed: usize,
        total: usize,
        last: Box<Error>,
    },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
