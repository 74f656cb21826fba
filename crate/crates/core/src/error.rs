use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The adaptive integrator could not advance; `tau` is the last accepted time.
    #[error("integration failed at tau = {tau}: {reason}")]
    Integration { tau: f64, reason: String },

    #[error("Gamma function pole at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("argument out of range: {0}")]
    Range(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
