use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub(crate) fn from_config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<mfgl_core::Error> for CliError {
    fn from(e: mfgl_core::Error) -> Self {
        if e.is_convergence() {
            CliError::Convergence(e.to_string())
        } else if matches!(e.root(), mfgl_core::Error::InvalidParameter { .. }) {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<mfgl_discrete::Error> for CliError {
    fn from(e: mfgl_discrete::Error) -> Self {
        match e {
            mfgl_discrete::Error::Core(c) => c.into(),
            mfgl_discrete::Error::InvalidParameter { .. }
            | mfgl_discrete::Error::Shape { .. }
            | mfgl_discrete::Error::NotStochastic { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}
