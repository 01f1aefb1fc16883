use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. `key` names the offending field.
    #[error("invalid value for `{key}`: {message}")]
    InvalidConfig { key: String, message: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("path delay {delay:.3e} s is not below the guard interval {guard:.3e} s")]
    DelayExceedsGuard { delay: f64, guard: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// The constraint level cannot be met. `bound` is the certified best value
    /// of the constrained metric.
    #[error("infeasible constraint level {level:.6e} (certified bound {bound:.6e})")]
    Infeasible { level: f64, bound: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("unknown scheme `{name}` (known: {known})")]
    UnknownScheme { name: String, known: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }
}
