use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A simulation step failed.
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: ednmr_core::Error,
    },

    #[error("{0}")]
    Check(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Numerical { .. } | CliError::Check(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches `context` to a core error raised while computing.
pub trait Context<T> {
    fn numerical(self, context: &str) -> Result<T>;
    /// For core errors caused by the inputs rather than the computation.
    fn config(self, context: &str) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, ednmr_core::Error> {
    fn numerical(self, context: &str) -> Result<T> {
        self.map_err(|source| CliError::Numerical { context: context.to_string(), source })
    }

    fn config(self, context: &str) -> Result<T> {
        self.map_err(|e| CliError::Config(format!("{context}: {e}")))
    }
}
