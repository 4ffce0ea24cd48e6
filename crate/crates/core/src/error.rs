use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An agent index was not in `0..n`.
    AgentOutOfRange { index: usize, n: usize },
    /// A per-agent vector had the wrong length.
    LengthMismatch { expected: usize, found: usize },
    /// An opinion state needs at least one agent.
    EmptyState,
    /// An opinion outside `[0, 1]` or not finite.
    OpinionOutOfRange { index: usize, value: f64 },
    /// The confidence threshold must lie in `(0, 1]`.
    InvalidThreshold(f64),
    /// A noise model or config parameter is out of its domain.
    InvalidParameter { name: &'static str, value: f64 },
    /// The operation needs noise with positive variance.
    DegenerateNoise,
    /// `log log s_t` is not positive, so the iterated-logarithm scaling is undefined.
    LilDomain { s2: f64 },
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::AgentOutOfRange { index, n } => {
                write!(f, "agent index {index} out of range for {n} agents")
            }
            Error::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
            Error::EmptyState => f.write_str("opinion state must contain at least one agent"),
            Error::OpinionOutOfRange { index, value } => {
                write!(f, "opinion {value} of agent {index} is outside [0, 1]")
            }
            Error::InvalidThreshold(eps) => {
                write!(f, "confidence threshold {eps} is outside (0, 1]")
            }
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid value {value} for parameter `{name}`")
            }
            Error::DegenerateNoise => f.write_str("noise model has zero variance"),
            Error::LilDomain { s2 } => {
                write!(f, "log log s_t is not positive for s_t^2 = {s2}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
