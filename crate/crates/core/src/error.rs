use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// One or more configuration fields are invalid.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// An exhaustive search would exceed its enumeration guard.
    #[error(
        "instance too large for exhaustive search: {combinations} combinations (limit {limit})"
    )]
    TooLarge { combinations: u128, limit: u128 },

    /// A text input could not be parsed.
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Node placement could not find a reachable destination.
    #[error("placement failed: {0}")]
    Placement(String),

    /// Writing results failed.
    #[error("output error: {0}")]
    Io(String),

    /// A run inside a batch failed.
    #[error("run {index}: {source}")]
    Run { index: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(field: impl Into<String>) -> Self {
        Error::Validation(vec![field.into()])
    }

    /// True for errors caused by bad inputs rather than by a failing run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) | Error::Parse { .. } | Error::Domain(_) => true,
            Error::Run { source, .. } => source.is_validation(),
            Error::TooLarge { .. } | Error::Placement(_) | Error::Io(_) => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
