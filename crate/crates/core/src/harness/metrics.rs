use serde::{Deserialize, Serialize};

use super::run::RunTrace;
use super::HarnessError;
use crate::hypernet::Hypernet;
use crate::linalg;

/// `Σ policy rewards / Σ random rewards`.
pub fn normalized_accumulated_reward(policy: &[f64], random: &[f64]) -> Result<f64, HarnessError> {
    if policy.len() != random.len() {
        return Err(HarnessError::LengthMismatch(policy.len(), random.len()));
    }
    let base: f64 = random.iter().sum();
    if base == 0.0 {
        return Err(HarnessError::ZeroBaseline);
    }
    Ok(policy.iter().sum::<f64>() / base)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretSeries {
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Per-step gap between the best candidate's and the chosen item's true
/// expected reward, and its running sum.
pub fn regret(trace: &RunTrace) -> Result<RegretSeries, HarnessError> {
    let mut per_step = Vec::with_capacity(trace.steps.len());
    let mut cumulative = Vec::with_capacity(trace.steps.len());
    let mut total = 0.0;
    for row in &trace.steps {
        let (Some(chosen), Some(best)) = (row.expected_reward, row.best_expected_reward) else {
            return Err(HarnessError::NoGroundTruth);
        };
        let r = best - chosen;
        total += r;
        per_step.push(r);
        cumulative.push(total);
    }
    Ok(RegretSeries { per_step, cumulative })
}

/// Singular values of `Θ_p` for every period, rows in period order.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdReport {
    pub rows: Vec<Vec<f64>>,
}

pub fn svd_report(net: &Hypernet) -> SvdReport {
    SvdReport {
        rows: net
            .all_thetas()
            .iter()
            .map(|t| linalg::singular_values(t.matrix()))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Mean wall time of scoring, selection and update per step.
    pub mean_bandit_step_seconds: f64,
    /// Total hypernetwork training time divided by the number of steps.
    pub mean_hypernet_seconds_per_step: f64,
}

pub fn timing_report(trace: &RunTrace) -> Result<TimingReport, HarnessError> {
    let n = trace.step_seconds.len();
    if n == 0 {
        return Err(HarnessError::EmptyTrace);
    }
    Ok(TimingReport {
        mean_bandit_step_seconds: trace.step_seconds.iter().sum::<f64>() / n as f64,
        mean_hypernet_seconds_per_step: trace.train_seconds.iter().sum::<f64>() / n as f64,
    })
}
