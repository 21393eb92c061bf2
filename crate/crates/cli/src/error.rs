use std::path::PathBuf;

/// Failures of a run, mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: forster_core::Error,
    },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Output { .. } => 2,
            RunError::Model { source, .. } => match source {
                forster_core::Error::Numerical(_)
                | forster_core::Error::Quadrature { .. }
                | forster_core::Error::Singular(_) => 3,
                _ => 2,
            },
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// Attaches scan context to core errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> RunResult<T>;
}

impl<T> Context<T> for forster_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> RunResult<T> {
        self.map_err(|source| RunError::Model { context: what(), source })
    }
}
