//! HyperBandit: a contextual bandit whose user-preference matrix is produced
//! per weekly time period by a hypernetwork, plus the environments, baselines
//! and experiment harness used to evaluate it.

pub mod env;
pub mod harness;
pub mod hypernet;
pub mod linalg;
pub mod period;
pub mod policy;
pub mod rng;
pub mod types;

#[cfg(test)]
mod oracle;

pub use env::{Candidate, EnvError, Environment, ReplayEnv, Step, SyntheticConfig, SyntheticEnv};
pub use linalg::{LinalgError, Matrix};
pub use period::{embed_period, period_of, PeriodEmbedding, TimePeriod};
pub use types::{InteractionRecord, ItemId, PreferenceMatrix, UserId};
