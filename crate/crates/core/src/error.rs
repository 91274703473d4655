use thiserror::Error;

/// Errors raised by the computational modules.
///
/// Variants fall into three families that the CLI maps onto exit codes:
/// invalid input, computational refusal, and exceeded budgets.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shift is not mixing: {0}")]
    NotMixing(String),

    #[error("function depth {found} not supported here (expected {expected}); recode to depth-one presentation first")]
    DepthMismatch { expected: usize, found: usize },

    #[error("word {word:?} is not admissible: {reason}")]
    Inadmissible { word: Vec<u16>, reason: String },

    #[error("eigen-iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("computed Perron eigenvector has a non-positive entry ({value:e}); mixing assumption broken")]
    NegativeEigenvector { value: f64 },

    #[error("no root bracket: P(psi) = {pressure} <= 0, the flow pressure must be positive")]
    NoBracket { pressure: f64 },

    #[error("s = {re}+{im}i is pole-proximal (condition estimate {condition:e})")]
    PoleProximal { re: f64, im: f64, condition: f64 },

    #[error("series representation diverges at Re(s) = {sigma}; use the resolvent continuation")]
    SeriesDivergent { sigma: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("budget exceeded: {what} (limit {limit}, reached {reached})")]
    Budget { what: String, limit: u64, reached: u64 },

    #[error("interpolation residual {residual:e} exceeds {tolerance:e} at order {order}")]
    InterpolationResidual { residual: f64, tolerance: f64, order: usize },

    #[error("overflow: {0}")]
    Overflow(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn refused(msg: impl Into<String>) -> Self {
        Error::Refused(msg.into())
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::NotMixing(_)
            | Error::DepthMismatch { .. }
            | Error::Inadmissible { .. } => ErrorKind::Input,
            Error::Budget { .. } => ErrorKind::Budget,
            _ => ErrorKind::Refusal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Refusal,
    Budget,
}

pub type Result<T> = std::result::Result<T, Error>;
