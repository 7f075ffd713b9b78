use std::path::PathBuf;

use thiserror::Error;

/// Exit codes of the binary.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_MATH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{}: [{section}] {field}: {message}", line.map_or("-".to_string(), |l| l.to_string()))]
    Config { path: PathBuf, line: Option<usize>, section: String, field: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] kernelbound::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use kernelbound::Error as E;
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Output { .. } => EXIT_CONFIG,
            CliError::Core(E::ResourceLimit(_)) => EXIT_RESOURCE,
            CliError::Core(E::Dimension(_) | E::Format(_) | E::Io(_)) => EXIT_CONFIG,
            CliError::Core(_) => EXIT_MATH,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
