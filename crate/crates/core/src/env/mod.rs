//! Environments that serve users and candidate items and return feedback.

mod replay;
mod synthetic;

pub use replay::{LogEntry, ReplayEnv};
pub use synthetic::{SyntheticConfig, SyntheticEnv};

use std::path::PathBuf;

use thiserror::Error;

use crate::period::{PeriodError, TimePeriod};
use crate::types::{ItemId, UserId};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("no feature row for item {0}")]
    MissingItem(ItemId),
    #[error("no feature row for user {0}")]
    MissingUser(UserId),
    #[error("step {step} is past the end of the log ({len} entries)")]
    EndOfLog { step: usize, len: usize },
    #[error("candidate index {index} out of range for {len} candidates")]
    BadChoice { index: usize, len: usize },
    #[error(transparent)]
    Period(#[from] PeriodError),
    #[error("environment construction failed: {0}")]
    Construction(String),
}

/// One candidate item as the policy sees it: id plus observed features.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub item: ItemId,
    pub observed: Vec<f64>,
}

/// Everything revealed to the policy before it acts at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t: usize,
    pub user: UserId,
    pub user_context: Vec<f64>,
    pub period: TimePeriod,
    pub candidates: Vec<Candidate>,
}

impl Step {
    pub fn candidate_ids(&self) -> Vec<ItemId> {
        self.candidates.iter().map(|c| c.item).collect()
    }
}

pub trait Environment {
    fn user_dim(&self) -> usize;

    fn observed_dim(&self) -> usize;

    fn candidates_per_step(&self) -> usize;

    /// Number of available steps, if finite.
    fn horizon(&self) -> Option<usize>;

    fn step(&mut self, t: usize) -> Result<Step, EnvError>;

    /// Binary feedback for recommending `step.candidates[chosen]`.
    fn feedback(&mut self, step: &Step, chosen: usize) -> Result<f64, EnvError>;

    /// True expected reward of every candidate, when the environment knows it.
    fn expected_rewards(&self, step: &Step) -> Option<Vec<f64>>;
}
