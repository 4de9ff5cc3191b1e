//! Weekly time periods and their embeddings.
//!
//! A week is split into 7 days × 5 sessions. Sessions within a day:
//!
//! | session | window          |
//! |---------|-----------------|
//! | 0       | 08:00 – 11:30   |
//! | 1       | 11:30 – 14:00   |
//! | 2       | 14:00 – 17:30   |
//! | 3       | 17:30 – 22:00   |
//! | 4       | everything else |
//!
//! The period index is `day * 5 + session` with Monday as day 0.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, streams};

pub const DAYS_PER_WEEK: usize = 7;
pub const SESSIONS_PER_DAY: usize = 5;
pub const NUM_PERIODS: usize = DAYS_PER_WEEK * SESSIONS_PER_DAY;
/// Width of the hypernetwork input.
pub const EMBEDDING_DIM: usize = 30;

const MINUTES_PER_DAY: u32 = 24 * 60;
/// Session start boundaries in minutes after midnight (sessions 0..=3).
const SESSION_BOUNDS: [u32; 5] = [8 * 60, 11 * 60 + 30, 14 * 60, 17 * 60 + 30, 22 * 60];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PeriodError {
    #[error("day index {0} out of range 0..=6")]
    Day(u32),
    #[error("minute of day {0} out of range 0..=1439")]
    Minute(u32),
    #[error("period index {0} out of range 0..=34")]
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct TimePeriod(usize);

impl TimePeriod {
    pub fn new(index: usize) -> Result<Self, PeriodError> {
        if index < NUM_PERIODS {
            Ok(Self(index))
        } else {
            Err(PeriodError::Index(index))
        }
    }

    /// Period that step `t` falls in when every period lasts `steps_per_period`
    /// steps and the week repeats.
    pub fn from_schedule(t: usize, steps_per_period: usize) -> Self {
        Self((t / steps_per_period.max(1)) % NUM_PERIODS)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    pub fn day(self) -> usize {
        self.0 / SESSIONS_PER_DAY
    }

    pub fn session(self) -> usize {
        self.0 % SESSIONS_PER_DAY
    }

    pub fn all() -> impl Iterator<Item = TimePeriod> {
        (0..NUM_PERIODS).map(TimePeriod)
    }
}

impl TryFrom<usize> for TimePeriod {
    type Error = PeriodError;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<TimePeriod> for usize {
    fn from(p: TimePeriod) -> usize {
        p.0
    }
}

impl fmt::Display for TimePeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps a weekday (Monday = 0) and minute of day to its period.
pub fn period_of(day_index: u32, minutes_of_day: u32) -> Result<TimePeriod, PeriodError> {
    if day_index as usize >= DAYS_PER_WEEK {
        return Err(PeriodError::Day(day_index));
    }
    if minutes_of_day >= MINUTES_PER_DAY {
        return Err(PeriodError::Minute(minutes_of_day));
    }
    let session = SESSION_BOUNDS
        .windows(2)
        .position(|w| (w[0]..w[1]).contains(&minutes_of_day))
        .unwrap_or(SESSIONS_PER_DAY - 1);
    Ok(TimePeriod(day_index as usize * SESSIONS_PER_DAY + session))
}

/// Fixed input vector for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEmbedding(Vec<f64>);

impl PeriodEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Unit-norm Gaussian vector drawn from the stream keyed by `(seed, period)`.
pub fn embed_period(period: TimePeriod, seed: u64) -> PeriodEmbedding {
    let mut rng = rng::stream(seed, streams::EMBEDDING_BASE + period.index() as u64);
    let mut v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    PeriodEmbedding(v)
}

/// Embeddings for all periods, indexed by period.
pub fn embedding_table(seed: u64) -> Vec<PeriodEmbedding> {
    TimePeriod::all().map(|p| embed_period(p, seed)).collect()
}
