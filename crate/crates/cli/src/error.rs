use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{stage}: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: kink_core::Error,
    },
    #[error("validation mismatch: {failed} of {total} checks failed")]
    Validation { failed: usize, total: usize },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Io { .. } => 1,
            Self::Numerical { .. } => 2,
            Self::Validation { .. } => 3,
        }
    }
}

/// Attaches the pipeline stage to a core error.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for kink_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { stage, source })
    }
}
