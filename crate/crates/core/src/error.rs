use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input: bad configuration, parameter out of range, plan gating.
    #[error("{module}: {message}")]
    Config {
        module: &'static str,
        message: String,
    },

    /// A numerical invariant was violated while computing.
    #[error("{module}: numerical invariant violated ({invariant}): {detail}")]
    Numerical {
        module: &'static str,
        invariant: &'static str,
        detail: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io: csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(module: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn numerical(
        module: &'static str,
        invariant: &'static str,
        detail: impl Into<String>,
    ) -> Self {
        Error::Numerical {
            module,
            invariant,
            detail: detail.into(),
        }
    }

    /// Process exit status for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Numerical { .. } => 3,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        }
    }
}
