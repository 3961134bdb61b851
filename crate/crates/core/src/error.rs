use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad parameters or malformed input data.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("sampled unit {unit} has zero inclusion probability")]
    ZeroProbability { unit: usize },

    #[error("second-order probabilities unknown for this design")]
    SecondOrderUnavailable,

    #[error("units {k} and {l} have zero joint inclusion probability")]
    ZeroJointProbability { k: usize, l: usize },

    #[error("ratio undefined: estimated denominator is zero")]
    UndefinedRatio,

    #[error("enumeration cap exceeded: {outcomes} outcomes requested, cap is {cap}")]
    CapExceeded { outcomes: u128, cap: u128 },

    #[error("{excluded} of {reps} replicates invalid (limit {limit})")]
    TooManyInvalid {
        excluded: usize,
        reps: usize,
        limit: usize,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors caused by the caller's input rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::MissingColumn { .. }
                | Error::BadCell { .. }
                | Error::Csv { .. }
                | Error::CapExceeded { .. }
        )
    }
}
