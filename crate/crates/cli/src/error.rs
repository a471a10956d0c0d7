use std::path::PathBuf;

use thiserror::Error;

use crate::config::Violation;

#[derive(Debug, Error)]
pub enum CliError {
    /// Every violation found while loading a configuration.
    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Violation>),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("unknown suite '{0}' (known: {1})")]
    UnknownSuite(String, String),

    #[error(transparent)]
    Core(#[from] blowup_core::Error),
}
