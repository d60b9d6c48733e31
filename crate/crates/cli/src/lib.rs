//! Scenario runner for the `cosserat` rod library.

use std::path::PathBuf;

pub mod output;
pub mod runner;
pub mod scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid scenario: {field}: {message}")]
    Validation { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("solver failed: {0}")]
    Solver(cosserat::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation { .. } => 2,
            Self::Solver(_) => 3,
            Self::Io { .. } => 1,
        }
    }
}

impl From<cosserat::Error> for CliError {
    fn from(e: cosserat::Error) -> Self {
        match e {
            cosserat::Error::InvalidInput(message) => Self::Validation {
                field: "model".into(),
                message,
            },
            e => Self::Solver(e),
        }
    }
}
