//! Bandit policies: the ridge-regression UCB policy driven by a generated
//! preference matrix, and the LinUCB and uniform-random baselines.

mod linucb;
mod random;
mod ridge;

pub use linucb::LinUcb;
pub use random::RandomPolicy;
pub use ridge::{split_theta, ucb_score, ArmStats, HyperBanditPolicy, PolicyConfig};

use thiserror::Error;

use crate::linalg::LinalgError;

/// Updates between exact re-inversions of a rank-1-updated matrix.
pub const RESOLVE_EVERY: usize = 1000;

/// Radicands in `[-RADICAND_SLACK, 0)` are rounding noise and clamp to zero.
pub const RADICAND_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("score for candidate {0} is not finite")]
    NonFiniteScore(usize),
    #[error("exploration radicand {0} is negative; inverse lost positive definiteness")]
    NegativeRadicand(f64),
    #[error("invalid policy configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Index of the largest score; ties go to the earliest position.
pub fn select(scores: &[f64]) -> Result<usize, PolicyError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(PolicyError::NonFiniteScore(i));
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i).ok_or(PolicyError::NoCandidates)
}

/// `α·sqrt(radicand)` with small negative radicands clamped.
pub(crate) fn exploration(alpha: f64, radicand: f64) -> Result<f64, PolicyError> {
    if radicand < -RADICAND_SLACK {
        return Err(PolicyError::NegativeRadicand(radicand));
    }
    Ok(alpha * radicand.max(0.0).sqrt())
}
