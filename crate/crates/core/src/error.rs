use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} outside of ({lo}, {hi})")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("no critical pulse train: {0}")]
    NoCriticalTrain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("adversarial delay {eta} fs outside [{lo}, {hi}] at T = {t} fs")]
    BoundViolation { eta: f64, lo: f64, hi: f64, t: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("characterization failed: {0}")]
    CharacterizationFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
