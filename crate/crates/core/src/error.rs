use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A line of a data or schema file could not be parsed. Lines are 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no records")]
    NoRecords,

    /// A precondition on an argument or on the data was violated.
    #[error("{0}")]
    Domain(String),

    /// Every record had a missing value on at least one attribute of the factor.
    #[error("factor unusable: no records remain after filtering missing values")]
    FactorUnusable,

    #[error("no informative factors")]
    NoInformativeFactors,

    /// Every factor in the table touches an attribute that is missing in the observation.
    #[error("observation unclassifiable")]
    Unclassifiable,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid observation: {0}")]
    Observation(String),

    #[error("invalid model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    /// True for failures caused by the data or model rather than by how the
    /// caller invoked the library (bad files, bad arguments).
    pub fn is_domain_failure(&self) -> bool {
        matches!(
            self,
            Error::NoInformativeFactors | Error::Unclassifiable | Error::FactorUnusable
        )
    }
}
