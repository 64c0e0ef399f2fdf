use std::path::PathBuf;

use thiserror::Error;

/// Failure of a CLI command, split by the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid configuration; `line` is 1-based when known.
    #[error("{}", format_config(.path, *.line, .message))]
    Config {
        path: Option<PathBuf>,
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Runtime(#[from] pspd::Error),
}

fn format_config(path: &Option<PathBuf>, line: Option<usize>, message: &str) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!("{}:{l}: {message}", p.display()),
        (Some(p), None) => format!("{}: {message}", p.display()),
        (None, _) => message.to_string(),
    }
}

impl CliError {
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_RUNTIME: i32 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            path: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => Self::EXIT_CONFIG,
            CliError::Runtime(pspd::Error::Config(_)) => Self::EXIT_CONFIG,
            CliError::Runtime(_) => Self::EXIT_RUNTIME,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Runtime(pspd::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
