use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::IngestError;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const INVALID_ARGUMENT: i32 = 4;
    pub const INFEASIBLE: i32 = 5;
    pub const RESOURCE_LIMIT: i32 = 6;
    pub const IO: i32 = 7;
    pub const NUMERIC: i32 = 8;
    pub const REPLAY: i32 = 9;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error(transparent)]
    Core(#[from] permci::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("replay refused: {0}")]
    Replay(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Ingest(IngestError::Io { .. }) => exit::IO,
            CliError::Ingest(_) => exit::INPUT,
            CliError::Core(e) => match e {
                permci::Error::InvalidArgument(_) => exit::INVALID_ARGUMENT,
                permci::Error::ResourceLimit(_) => exit::RESOURCE_LIMIT,
                permci::Error::Numeric(_) => exit::NUMERIC,
                permci::Error::InfeasibleAdjustment { .. } => exit::INFEASIBLE,
            },
            CliError::Usage(_) => exit::INVALID_ARGUMENT,
            CliError::Io { .. } => exit::IO,
            CliError::Replay(_) => exit::REPLAY,
        }
    }
}
