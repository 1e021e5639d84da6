use thiserror::Error;

/// Errors produced by the filtering, identification and reporting layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("singular system: pivot {pivot:e} at row {row} below threshold {threshold:e}")]
    Singular {
        row: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("regressor has zero energy")]
    ZeroRegressor,

    #[error("reference weights have zero norm")]
    ZeroReference,

    #[error("run {run}, iteration {iteration}: {source}")]
    RunFailed {
        run: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
