use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quantizer argument {value} outside range [-{range}, {range}]")]
    OutOfRange { value: f64, range: f64 },

    #[error("closed loop A+BK is not stabilized: {0}")]
    NotStabilized(String),

    #[error("{0} is not available for this system")]
    Unsupported(&'static str),

    #[error("target radius eps = {eps} must satisfy 0 < eps < R = {r}")]
    InvalidTarget { eps: f64, r: f64 },

    #[error("dissipation W vanishes at a point where the nominal feedback does not")]
    DegenerateW,

    #[error("not a control Lyapunov function: L_gV = 0 and L_fV = {a} >= 0 at a nonzero state")]
    NotClf { a: f64 },

    #[error("time {t} outside the stored history [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("quantizer argument {value} exceeded range {range} at t = {t}")]
    QuantizerOutOfRange { t: f64, value: f64, range: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("{count} switches within {window} around t = {t}")]
    EventAccumulation { t: f64, count: usize, window: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
