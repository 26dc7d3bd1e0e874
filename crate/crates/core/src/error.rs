use thiserror::Error;

/// Errors raised by the kernel, norm, series and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A spec or configuration is malformed or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// A quadrature, inversion or fit did not reach its tolerance.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A tabulated grid does not cover the requested point.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Series terms failed to decay geometrically.
    #[error("series diverged at order {order}: {reason} (t1 = {t1:e})")]
    Divergence { order: usize, reason: String, t1: f64 },

    /// The requested time lies beyond the certified small-time horizon.
    #[error("t = {t:e} exceeds the small-time horizon t1 = {t1:e}")]
    BeyondHorizon { t: f64, t1: f64 },

    /// No norm value on the grid met the horizon threshold.
    #[error("out of class: {0}")]
    OutOfClass(String),

    /// Monte Carlo produced no usable samples in the requested window.
    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    /// The requested combination is not supported by this build.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

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

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
