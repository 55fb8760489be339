use thiserror::Error;

/// Out-of-range argument to one of the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("count k = {k} exceeds sample size n = {n}")]
    CountExceedsSize { k: u64, n: u64 },
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

impl DomainError {
    pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<(), DomainError> {
        if (0.0..=1.0).contains(&value) {
            Ok(())
        } else {
            Err(DomainError::OutOfRange {
                name,
                value,
                range: "[0, 1]",
            })
        }
    }

    pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<(), DomainError> {
        if value > 0.0 && value < 1.0 {
            Ok(())
        } else {
            Err(DomainError::OutOfRange {
                name,
                value,
                range: "(0, 1)",
            })
        }
    }

    pub(crate) fn check_significance(value: f64) -> Result<(), DomainError> {
        if value > 0.0 && value < 0.5 {
            Ok(())
        } else {
            Err(DomainError::OutOfRange {
                name: "alpha",
                value,
                range: "(0, 0.5)",
            })
        }
    }
}

/// Failure while talking to a classifier.
#[derive(Debug, Error)]
pub enum ModelError {
    /// The model was handed inputs it cannot accept, or was built from an
    /// invalid description.
    #[error("model configuration: {0}")]
    Config(String),
    /// The external process died, timed out, or answered with garbage.
    #[error("model transport: {0}")]
    Transport(String),
}

/// Top-level error with a stable mapping onto process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Transport(_) => 3,
            Error::Estimation(_) => 4,
            Error::Internal(_) => 5,
        }
    }
}

impl From<ModelError> for Error {
    fn from(err: ModelError) -> Self {
        match err {
            ModelError::Config(msg) => Error::Config(msg),
            ModelError::Transport(msg) => Error::Transport(msg),
        }
    }
}

impl From<DomainError> for ModelError {
    fn from(err: DomainError) -> Self {
        ModelError::Config(err.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Internal(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
