use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("model construction failed: {0}")]
    Model(String),

    #[error("numerical failure at epoch {epoch}: {what}")]
    Numerical { epoch: usize, what: String },

    #[error("non-finite measurement at epoch {epoch}")]
    NonFiniteMeasurement { epoch: usize },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("{aborted} of {trials} trials aborted (limit 1%); first: {first}")]
    ExcessiveAborts {
        aborted: usize,
        trials: usize,
        first: String,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for numerical failures, 4 when
    /// too many Monte Carlo trials aborted.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Format(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Model(_) | Error::Numerical { .. } | Error::NonFiniteMeasurement { .. } | Error::Metric(_) => 3,
            Error::ExcessiveAborts { .. } => 4,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(epoch: usize, what: impl Into<String>) -> Self {
        Error::Numerical {
            epoch,
            what: what.into(),
        }
    }
}
