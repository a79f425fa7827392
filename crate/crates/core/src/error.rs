use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants map onto stable classes (see [`Error::class`]) so that front ends
/// can turn them into exit codes without matching every variant.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in component {component} at t = {t}: arguments {args:?}")]
    Evaluation {
        component: usize,
        t: f64,
        args: Vec<f64>,
    },

    #[error("state left the domain box at t = {t}: {state:?}")]
    DomainExit { t: f64, state: Vec<f64> },

    #[error("delay tau[{i}][{j}]({t}) = {value} outside [0, {tau_max}]")]
    DelayBound {
        i: usize,
        j: usize,
        t: f64,
        value: f64,
        tau_max: f64,
    },

    #[error("history queried at t = {t}, outside [-{tau_max}, 0]")]
    HistoryRange { t: f64, tau_max: f64 },

    #[error("trajectory queried at t = {t}, outside [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("invalid order interval: lo {lo:?} is not <= hi {hi:?}")]
    InvalidInterval { lo: Vec<f64>, hi: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis check failed: {property}: {detail}")]
    Hypothesis { property: String, detail: String },

    #[error("computation failed: {0}")]
    Computation(String),

    #[error("unknown system id {0:?}")]
    UnknownSystem(String),
}

/// Coarse error class used for exit-code mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Integration,
    Hypothesis,
    Usage,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Evaluation { .. }
            | Error::DomainExit { .. }
            | Error::DelayBound { .. }
            | Error::HistoryRange { .. }
            | Error::OutOfRange { .. }
            | Error::Computation(_) => ErrorClass::Integration,
            Error::Hypothesis { .. } => ErrorClass::Hypothesis,
            _ => ErrorClass::Usage,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
