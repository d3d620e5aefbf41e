//! Support library for the `aoi-sched` binary: config-file parsing, sweep
//! presets, and deterministic CSV formatting. Kept as a library so the
//! pieces are unit-testable without spawning the binary.

pub mod config;
pub mod output;
pub mod preset;

use aoi_core::{MdpError, ModelError};
use thiserror::Error;

/// Top-level failure classes, each with its own process exit code:
/// usage/config problems exit 2, numerical failures exit 3, and
/// structure-check failures exit 4. Output-stream failures exit 1, except a
/// broken pipe, which the binary treats as an early, successful stop.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerics(String),
    #[error("{0}")]
    ChecksFailed(String),
    #[error("cannot write output: {0}")]
    Io(String),
    #[error("output pipe closed")]
    Pipe,
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Numerics(_) => 3,
            AppError::ChecksFailed(_) => 4,
            AppError::Io(_) => 1,
            AppError::Pipe => 0,
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            AppError::Pipe
        } else {
            AppError::Io(e.to_string())
        }
    }
}

impl From<ModelError> for AppError {
    fn from(e: ModelError) -> Self {
        AppError::Usage(e.to_string())
    }
}

impl From<MdpError> for AppError {
    fn from(e: MdpError) -> Self {
        match e {
            // bad requests, not bad numerics
            MdpError::TooManyClients(_) | MdpError::AgeCapTooSmall(_) | MdpError::Model(_) => {
                AppError::Usage(e.to_string())
            }
            _ => AppError::Numerics(e.to_string()),
        }
    }
}
