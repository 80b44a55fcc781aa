use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be inverted is numerically singular.
    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: String, condition: f64 },

    /// The heralding event has zero (or numerically unresolvable) probability.
    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    /// The Fock truncation leaves too much probability above the cutoff.
    #[error("truncation error: tail probability {tail:.3e} above n = {cutoff} exceeds 1e-8")]
    Truncation { cutoff: usize, tail: f64 },

    /// The rejection-sampling envelope accepts too rarely to be usable.
    #[error("envelope failure: acceptance rate {acceptance:.3e} below 1%")]
    EnvelopeFailure { acceptance: f64 },

    /// Two separated local maxima of comparable height were found.
    #[error("multimodal objective: local maxima at {first:.4} and {second:.4} within 0.005")]
    Multimodal { first: f64, second: f64 },

    /// A configuration file is malformed or incomplete.
    #[error("config error: {0}")]
    Config(String),

    /// Reading or writing a file failed.
    #[error("I/O error: {0}")]
    Io(String),

    /// A cross-check exceeded its tolerance.
    #[error("validation failed: {0}")]
    Validation(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
