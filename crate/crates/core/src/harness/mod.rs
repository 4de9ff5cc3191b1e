//! Experiment runner: the online loop, baselines, metrics and result files.

mod config;
mod io;
mod metrics;
mod run;

pub use config::{EnvironmentSpec, ExperimentConfig, PolicyKind, ReplaySpec, Seeds};
pub use io::{
    read_buffers, read_summary, read_trace, write_buffers, write_outputs, write_svd, write_trace,
    OutputFiles,
};
pub use metrics::{
    normalized_accumulated_reward, regret, svd_report, timing_report, RegretSeries, SvdReport,
    TimingReport,
};
pub use run::{run, run_in, run_with_progress, BufferRow, RunOutcome, RunTrace, StepRow, Summary};

use std::path::PathBuf;

use thiserror::Error;

use crate::env::EnvError;
use crate::hypernet::HypernetError;
use crate::linalg::LinalgError;
use crate::policy::PolicyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Hypernet(#[from] HypernetError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("regret needs a ground-truth environment; this trace has none")]
    NoGroundTruth,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("normalized reward is undefined: the random baseline earned nothing")]
    ZeroBaseline,
    #[error("traces differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numerical,
}

impl HarnessError {
    pub fn kind(&self) -> ErrorKind {
        use ErrorKind::*;
        match self {
            HarnessError::Config(_) | HarnessError::LengthMismatch(..) => Config,
            HarnessError::Io { .. } | HarnessError::Format { .. } => Io,
            HarnessError::Env(e) => match e {
                EnvError::Config(_) | EnvError::EndOfLog { .. } | EnvError::BadChoice { .. } => Config,
                EnvError::Io { .. }
                | EnvError::Csv { .. }
                | EnvError::MissingItem(_)
                | EnvError::MissingUser(_)
                | EnvError::Period(_) => Io,
                EnvError::Construction(_) => Numerical,
            },
            HarnessError::Policy(e) => match e {
                PolicyError::Config(_) | PolicyError::NoCandidates => Config,
                _ => Numerical,
            },
            HarnessError::Hypernet(e) => match e {
                HypernetError::Io(_) | HypernetError::Checkpoint(_) => Io,
                HypernetError::NonFinite => Numerical,
                _ => Config,
            },
            HarnessError::Linalg(_) => Numerical,
            HarnessError::NoGroundTruth | HarnessError::EmptyTrace => Config,
            HarnessError::ZeroBaseline => Numerical,
        }
    }
}
