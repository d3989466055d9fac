//! Run configuration, orchestration, parameter sweeps and file output.

pub mod config;
pub mod init;
pub mod pgm;
pub mod run;
pub mod sweep;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::DynamicsError;
use crate::spectral::snapshot::SnapshotError;
use crate::spectral::SpectralError;
use crate::stationary::StationaryError;

pub use config::{ModelKind, RunConfig};
pub use pgm::{decode_pgm, emit_pgm, encode_pgm, PgmImage};
pub use run::{run, RunSummary};
pub use sweep::{loglog_fit, refinement_study, sweep_d, sweep_delta, Fit, RefinementResult, SweepResult};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error("{source}; last finite state written to {}", dump.display())]
    Blowup { source: DynamicsError, dump: PathBuf },
    #[error("malformed image: {0}")]
    Image(String),
}

impl ExperimentError {
    /// Process exit status: 1 for I/O, 2 for configuration, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Spectral(_) => 2,
            ExperimentError::Io(_)
            | ExperimentError::Csv(_)
            | ExperimentError::Snapshot(_)
            | ExperimentError::Image(_) => 1,
            ExperimentError::Dynamics(e) => dynamics_code(e),
            ExperimentError::Stationary(e) => match e {
                StationaryError::InvalidConfig(_) | StationaryError::Spectral(_) => 2,
                StationaryError::ConditionViolated(_) | StationaryError::NonConvergence { .. } => 3,
                StationaryError::Dynamics(d) => dynamics_code(d),
            },
            ExperimentError::Blowup { .. } => 3,
        }
    }
}

fn dynamics_code(e: &DynamicsError) -> i32 {
    match e {
        DynamicsError::InvalidParams(_) | DynamicsError::UnsupportedLaw | DynamicsError::Spectral(_) => 2,
        DynamicsError::NonFinite { .. } | DynamicsError::StepSize { .. } => 3,
    }
}
