use thiserror::Error;

/// Errors raised by the estimation, quadrature and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample with norm {norm} lies outside the ball of radius {radius}")]
    DomainViolation { norm: f64, radius: f64 },

    #[error("empty sample set: {0}")]
    EmptySampleSet(&'static str),

    #[error("need more than {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("dimension {0} is too high for this operation")]
    DimensionTooHigh(usize),

    #[error("spectrum is not integrable: {0}")]
    NonIntegrableSpectrum(String),

    /// An exponential `exp(x)` was requested with `x` above the overflow ceiling.
    #[error("exponent {exponent} exceeds the overflow ceiling {ceiling}")]
    Overflow { exponent: f64, ceiling: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl Error {
    /// Whether the error comes from bad input rather than from the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::DimensionMismatch { .. }
                | Error::EmptySampleSet(_)
                | Error::InsufficientSamples { .. }
                | Error::DimensionTooHigh(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
