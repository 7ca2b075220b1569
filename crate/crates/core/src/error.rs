use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("evaluation point coincides with atom {index}")]
    EvaluationAtAtom { index: usize },

    #[error("logarithmic kernel requires points inside the disc of radius 1/2; point {index} has |x| = {norm}")]
    LogDomainViolation { index: usize, norm: f64 },

    #[error("ladder rung {rung} (scale {scale:e}) lies below the measure resolution {resolution:e}")]
    BelowResolution {
        rung: usize,
        scale: f64,
        resolution: f64,
    },

    #[error("{count} atoms exceed the cap of {cap} for this operation")]
    TooManyAtoms { count: usize, cap: usize },

    #[error("atom budget exceeded: {what} needs {needed} atoms, budget is {budget}")]
    BudgetExceeded {
        what: String,
        needed: f64,
        budget: usize,
    },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("gauge violation: {reason}")]
    GaugeViolation { reason: String },

    #[error("discs {first} and {second} overlap")]
    OverlappingDiscs { first: usize, second: usize },

    #[error("point lies inside exceptional ball {ball} of level {level}")]
    InsideExceptionalBall { level: usize, ball: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measure file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by atom/generation budget guards.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. } | Error::TooManyAtoms { .. })
    }
}
