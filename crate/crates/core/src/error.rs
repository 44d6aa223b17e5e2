use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("schedule horizon {schedule} does not match system duration {system}")]
    HorizonMismatch { schedule: f64, system: f64 },

    #[error("numerical corruption: {0}")]
    Corruption(String),

    #[error("parameter {index} = {value} lies outside [0, {bound}]")]
    OutOfBounds { index: usize, value: f64, bound: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable short identifier used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Degenerate(_) => "degenerate_input",
            Error::NonFinite(_) => "non_finite",
            Error::HorizonMismatch { .. } => "horizon_mismatch",
            Error::Corruption(_) => "numerical_corruption",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::EmptyBatch => "empty_batch",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
