use std::io;
use std::path::PathBuf;

/// Errors surfaced by the command-line tool. All of them are input or
/// environment problems and map to exit code [`EXIT_INPUT`](crate::cli::EXIT_INPUT).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("{}: invalid JSON: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] tucker_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
