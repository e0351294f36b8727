use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: &'static str },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("mollifier undefined at t≤0")]
    MollifierTime,
    #[error("zero denominator in ratio")]
    ZeroDenominator,
    #[error("CFL violation: dt = {dt} exceeds limit, suggested dt = {suggested}")]
    Cfl { dt: f64, suggested: f64 },
    #[error("need at least {needed} time samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidArgument { name, reason }
}
