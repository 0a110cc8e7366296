use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration: unknown key, bad value or violated invariant.
    #[error("{0}")]
    Config(String),
    #[error("failed to parse {source_name}: {message}")]
    Parse { source_name: String, message: String },
    #[error("cannot read `{}`: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{}`: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot encode output: {0}")]
    Encode(String),
    #[error(transparent)]
    Core(#[from] cbo_games::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
