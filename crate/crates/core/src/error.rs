use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The request exceeds what the exact (enumerated) backend can hold.
    #[error("capacity exceeded: {what} = {value} (cap {cap})")]
    Capacity {
        what: &'static str,
        value: f64,
        cap: f64,
    },

    /// An index or interval falls outside the data it refers to.
    #[error("out of range: {0}")]
    Range(String),

    #[error("invalid argument `{name}`: {reason}")]
    Argument { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical scheme could not reach the requested accuracy.
    #[error("accuracy not reached: estimated error {estimate:e} > tolerance {tolerance:e}")]
    Accuracy { estimate: f64, tolerance: f64 },

    #[error("not enough samples: got {got}, need at least {need}")]
    SampleShortfall { got: usize, need: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Argument {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by asking the exact backend for too much.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. } | Error::Range(_))
    }
}
