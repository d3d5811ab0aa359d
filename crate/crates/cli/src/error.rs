use thiserror::Error;

/// Failures surfaced by the CLI, partitioned by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad usage, unreadable or invalid configuration. Exit code 1.
    #[error("configuration error: {0}")]
    Config(String),

    /// A model, simulation or fit operation failed. Exit code 2.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Filesystem trouble while reading inputs or writing outputs. Exit
    /// code 2.
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON error report for stderr.
    pub fn report(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() }
        })
        .to_string()
    }
}

impl From<serfsim_core::Error> for CliError {
    fn from(e: serfsim_core::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
