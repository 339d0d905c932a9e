//! Command implementations behind the `csi-har` binary.

pub mod archive;
pub mod commands;
pub mod config;
pub mod eval;
pub mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use archive::{load_model, save_model, ArchiveError, ModelArchive};
pub use commands::{cmd_eval, cmd_predict, cmd_synth, cmd_train, load_dataset, PredictInput, PredictOutput};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] csi_har_core::Error),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
