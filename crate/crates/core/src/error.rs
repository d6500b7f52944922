use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The photon-number expansion hit its term cap before the requested
    /// tail tolerance was reached.
    #[error("truncation cap {cap} reached with tail mass {tail_mass:e} (tolerance {tolerance:e})")]
    Truncation {
        cap: usize,
        tolerance: f64,
        tail_mass: f64,
    },

    /// Trigger odds are unbounded because the trigger probability is 1
    /// (ideal heralding detector and at least one photon).
    #[error("trigger odds unbounded at n = {n}: trigger probability is 1")]
    UnboundedOdds { n: usize },

    /// An observable that appears in a denominator vanished.
    #[error("degenerate observables: {quantity} is zero")]
    DegenerateObservables { quantity: &'static str },

    /// The source-strength optimizer found no positive key rate anywhere
    /// in its search interval.
    #[error("no positive key rate for mu in [{lo:e}, {hi:e}]")]
    AllRatesZero { lo: f64, hi: f64 },

    /// A bisection bracket does not actually bracket the sought crossing.
    #[error("invalid bracket: {reason}")]
    InvalidBracket { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
