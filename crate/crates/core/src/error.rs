use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid appliance parameters: {0}")]
    InvalidParams(String),
    #[error("cycle phase {y} h outside [0, {cycle})")]
    InvalidPhase { y: f64, cycle: f64 },
    #[error("an appliance class needs at least one appliance")]
    EmptyClass,
    #[error("a portfolio needs at least one class")]
    EmptyPortfolio,
    #[error("duration must be finite and non-negative, got {0} h")]
    InvalidDuration(f64),
    #[error("infeasible duration: {t} h exceeds the {scheme} maximum of {max} h")]
    InfeasibleDuration { t: f64, max: f64, scheme: &'static str },
    #[error("infeasible amplitude: {requested} W exceeds the {scheme} maximum of {max} W over {t} h")]
    InfeasibleAmplitude {
        requested: f64,
        max: f64,
        t: f64,
        scheme: &'static str,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed broadcast message: {0}")]
    InvalidMessage(String),
    #[error("invalid simulation input: {0}")]
    InvalidSimulation(String),
    #[error("trace mismatch: {0}")]
    TraceMismatch(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the input rather than the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
