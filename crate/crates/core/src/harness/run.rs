//! The online loop: per step score, select, observe and update; per buffer
//! train the hypernetwork and refresh the generated preference matrices.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{EnvironmentSpec, ExperimentConfig, PolicyKind};
use super::metrics::{normalized_accumulated_reward, regret, timing_report, TimingReport};
use super::HarnessError;
use crate::env::{Environment, ReplayEnv, Step, SyntheticEnv};
use crate::hypernet::{
    labels_from_step, train_on_buffer, Adam, Hypernet, HypernetConfig, TrainingExample,
};
use crate::linalg::Matrix;
use crate::policy::{select, HyperBanditPolicy, LinUcb, PolicyConfig, RandomPolicy};
use crate::rng::{self, streams};
use crate::types::PreferenceMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: usize,
    pub period: usize,
    pub user: u64,
    pub item: u64,
    pub reward: f64,
    pub cumulative_reward: f64,
    /// True expected reward of the chosen item, when known.
    pub expected_reward: Option<f64>,
    /// Best true expected reward among the step's candidates, when known.
    pub best_expected_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferRow {
    pub n: usize,
    pub start_step: usize,
    pub end_step: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub initial_validation_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub steps: Vec<StepRow>,
    pub buffers: Vec<BufferRow>,
    /// Wall time of the bandit part of each step.
    pub step_seconds: Vec<f64>,
    /// Wall time of each hypernetwork training round.
    pub train_seconds: Vec<f64>,
}

impl RunTrace {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cumulative_reward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: PolicyKind,
    pub steps: usize,
    pub total_reward: f64,
    pub baseline_total_reward: f64,
    /// `null` when the random baseline earned nothing.
    pub normalized_accumulated_reward: Option<f64>,
    pub final_cumulative_regret: Option<f64>,
    pub mean_regret_first_quarter: Option<f64>,
    pub mean_regret_last_quarter: Option<f64>,
    pub buffers_trained: usize,
    pub mean_epochs: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub trace: RunTrace,
    pub baseline_rewards: Vec<f64>,
    pub summary: Summary,
    pub timings: TimingReport,
    pub hypernet: Option<Hypernet>,
}

/// Builds the configured environment and runs the experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    run_with_progress(config, &mut |_| {})
}

/// Like [`run`], calling `progress` after every trained buffer.
pub fn run_with_progress(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&BufferRow),
) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    match &config.environment {
        EnvironmentSpec::Synthetic(s) => {
            let mut s = s.clone();
            s.seed = config.seeds.environment;
            run_in(config, SyntheticEnv::new(s)?, None, progress)
        }
        EnvironmentSpec::Replay(r) => {
            let env = ReplayEnv::from_files(
                &r.interactions,
                &r.users,
                &r.items,
                r.candidates,
                config.seeds.environment,
            )?;
            run_in(config, env, None, progress)
        }
    }
}

/// Runs `config` on a prepared environment. `hypernet` overrides the freshly
/// initialized network for the hyperbandit policy.
pub fn run_in<E: Environment + Clone>(
    config: &ExperimentConfig,
    env: E,
    hypernet: Option<Hypernet>,
    progress: &mut dyn FnMut(&BufferRow),
) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    if env.user_dim() != config.user_dim || env.observed_dim() != config.observed_dim {
        return Err(HarnessError::Config(format!(
            "environment provides user_dim {} / observed_dim {}, config expects {} / {}",
            env.user_dim(),
            env.observed_dim(),
            config.user_dim,
            config.observed_dim
        )));
    }
    let steps = match (config.steps, env.horizon()) {
        (Some(s), Some(h)) if s > h => {
            return Err(HarnessError::Config(format!(
                "steps {s} exceeds the {h} logged interactions"
            )))
        }
        (Some(s), _) => s,
        (None, Some(h)) => h,
        (None, None) => return Err(HarnessError::Config("steps is required".into())),
    };
    if steps == 0 {
        return Err(HarnessError::Config("nothing to run: zero steps".into()));
    }

    let baseline = run_random(env.clone(), steps, config.seeds.baseline)?;
    let mut env = env;
    let (trace, hypernet) = match config.policy {
        PolicyKind::Hyperbandit => run_hyperbandit(config, &mut env, steps, hypernet, progress)?,
        PolicyKind::Linucb => (run_linucb(config, &mut env, steps)?, None),
        PolicyKind::Random => (run_random(env, steps, config.seeds.training)?, None),
        PolicyKind::Oracle => (run_oracle(&mut env, steps)?, None),
    };

    let baseline_rewards = baseline.rewards();
    let normalized = match normalized_accumulated_reward(&trace.rewards(), &baseline_rewards) {
        Ok(v) => Some(v),
        Err(HarnessError::ZeroBaseline) => None,
        Err(e) => return Err(e),
    };
    let (final_regret, first, last) = match regret(&trace) {
        Ok(r) => {
            let q = steps / 4;
            let mean = |s: &[f64]| (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64);
            (
                r.cumulative.last().copied(),
                mean(&r.per_step[..q]),
                mean(&r.per_step[steps - q..]),
            )
        }
        Err(HarnessError::NoGroundTruth) => (None, None, None),
        Err(e) => return Err(e),
    };
    let epochs: Vec<f64> = trace.buffers.iter().map(|b| b.epochs as f64).collect();
    let summary = Summary {
        policy: config.policy,
        steps,
        total_reward: trace.total_reward(),
        baseline_total_reward: baseline.total_reward(),
        normalized_accumulated_reward: normalized,
        final_cumulative_regret: final_regret,
        mean_regret_first_quarter: first,
        mean_regret_last_quarter: last,
        buffers_trained: trace.buffers.len(),
        mean_epochs: (!epochs.is_empty()).then(|| epochs.iter().sum::<f64>() / epochs.len() as f64),
    };
    let timings = timing_report(&trace)?;
    Ok(RunOutcome {
        config: config.clone(),
        trace,
        baseline_rewards,
        summary,
        timings,
        hypernet,
    })
}

/// Appends a step row, filling ground-truth columns when the env knows them.
fn record<E: Environment>(trace: &mut RunTrace, env: &E, step: &Step, chosen: usize, reward: f64, secs: f64) {
    let expected = env.expected_rewards(step);
    let cumulative = trace.total_reward() + reward;
    trace.steps.push(StepRow {
        t: step.t,
        period: step.period.index(),
        user: step.user.0,
        item: step.candidates[chosen].item.0,
        reward,
        cumulative_reward: cumulative,
        expected_reward: expected.as_ref().map(|e| e[chosen]),
        best_expected_reward: expected
            .as_ref()
            .map(|e| e.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    });
    trace.step_seconds.push(secs);
}

fn run_random<E: Environment>(mut env: E, steps: usize, seed: u64) -> Result<RunTrace, HarnessError> {
    let mut policy = RandomPolicy::new(seed);
    let mut trace = RunTrace::default();
    for t in 0..steps {
        let step = env.step(t)?;
        let clock = Instant::now();
        let chosen = policy.choose(step.candidates.len())?;
        let secs = clock.elapsed().as_secs_f64();
        let reward = env.feedback(&step, chosen)?;
        record(&mut trace, &env, &step, chosen, reward, secs);
    }
    Ok(trace)
}

fn run_oracle<E: Environment>(env: &mut E, steps: usize) -> Result<RunTrace, HarnessError> {
    let mut trace = RunTrace::default();
    for t in 0..steps {
        let step = env.step(t)?;
        let clock = Instant::now();
        let expected = env.expected_rewards(&step).ok_or(HarnessError::NoGroundTruth)?;
        let chosen = select(&expected)?;
        let secs = clock.elapsed().as_secs_f64();
        let reward = env.feedback(&step, chosen)?;
        record(&mut trace, env, &step, chosen, reward, secs);
    }
    Ok(trace)
}

fn run_linucb<E: Environment>(
    config: &ExperimentConfig,
    env: &mut E,
    steps: usize,
) -> Result<RunTrace, HarnessError> {
    let mut policy = LinUcb::new(config.user_dim + config.observed_dim, config.alpha, config.lambda)?;
    let mut trace = RunTrace::default();
    for t in 0..steps {
        let step = env.step(t)?;
        let clock = Instant::now();
        let chosen = policy.choose(&step)?;
        let mut secs = clock.elapsed().as_secs_f64();
        let reward = env.feedback(&step, chosen)?;
        let clock = Instant::now();
        let z = LinUcb::features(&step.user_context, &step.candidates[chosen].observed);
        policy.update(&z, reward)?;
        secs += clock.elapsed().as_secs_f64();
        record(&mut trace, env, &step, chosen, reward, secs);
    }
    Ok(trace)
}

struct Buffered {
    step: Step,
    chosen: usize,
    reward: f64,
}

/// Training examples for a closed buffer, with latent features frozen at
/// their current estimates.
fn examples(buffer: &[Buffered], policy: &HyperBanditPolicy, item_dim: usize) -> Vec<TrainingExample> {
    buffer
        .iter()
        .map(|b| {
            let m = b.step.candidates.len();
            let mut contexts = Matrix::zeros(m, item_dim);
            for (k, c) in b.step.candidates.iter().enumerate() {
                let row = c.observed.iter().chain(policy.latent(c.item));
                for (j, v) in row.enumerate() {
                    contexts.set(k, j, *v);
                }
            }
            TrainingExample {
                period: b.step.period,
                user: b.step.user_context.clone(),
                contexts,
                labels: labels_from_step(m, b.chosen, b.reward),
            }
        })
        .collect()
}

fn run_hyperbandit<E: Environment>(
    config: &ExperimentConfig,
    env: &mut E,
    steps: usize,
    hypernet: Option<Hypernet>,
    progress: &mut dyn FnMut(&BufferRow),
) -> Result<(RunTrace, Option<Hypernet>), HarnessError> {
    let mut net = match hypernet {
        Some(n) => n,
        None => Hypernet::new(&HypernetConfig {
            hidden: config.hidden.clone(),
            head: config.head,
            item_dim: config.item_dim(),
            user_dim: config.user_dim,
            init_seed: config.seeds.hypernet,
            embedding_seed: config.seeds.embedding,
        })?,
    };
    if net.item_dim() != config.item_dim() || net.user_dim() != config.user_dim {
        return Err(HarnessError::Config(format!(
            "hypernetwork produces {}×{} matrices, config needs {}×{}",
            net.item_dim(),
            net.user_dim(),
            config.item_dim(),
            config.user_dim
        )));
    }
    let mut policy = HyperBanditPolicy::new(PolicyConfig {
        alpha: config.alpha,
        lambda: config.lambda,
        observed_dim: config.observed_dim,
        latent_dim: config.latent_dim,
        user_dim: config.user_dim,
    })?;
    let mut adam = Adam::new(net.mlp(), config.training.adam);
    let mut shuffle = rng::stream(config.seeds.training, streams::TRAIN_SHUFFLE);
    // Θ depends only on the period and the frozen parameters of the current
    // buffer, so all 35 are generated once per buffer.
    let mut thetas: Vec<PreferenceMatrix> = net.all_thetas();
    let mut buffer: Vec<Buffered> = Vec::with_capacity(config.buffer_size);
    let mut trace = RunTrace::default();

    for t in 0..steps {
        let step = env.step(t)?;
        let clock = Instant::now();
        let theta = &thetas[step.period.index()];
        let proj = policy.project(theta, &step.user_context)?;
        let chosen = policy.choose(&step, &proj)?;
        let mut secs = clock.elapsed().as_secs_f64();
        let reward = env.feedback(&step, chosen)?;
        let clock = Instant::now();
        let cand = &step.candidates[chosen];
        policy.update(cand.item, &proj, &cand.observed, reward)?;
        secs += clock.elapsed().as_secs_f64();
        record(&mut trace, env, &step, chosen, reward, secs);
        buffer.push(Buffered { step, chosen, reward });

        if buffer.len() == config.buffer_size {
            if config.train_hypernet {
                let clock = Instant::now();
                let data = examples(&buffer, &policy, config.item_dim());
                let report = train_on_buffer(&mut net, &mut adam, &data, &config.training, &mut shuffle)?;
                thetas = net.all_thetas();
                trace.train_seconds.push(clock.elapsed().as_secs_f64());
                let row = BufferRow {
                    n: trace.buffers.len(),
                    start_step: t + 1 - buffer.len(),
                    end_step: t,
                    epochs: report.epochs,
                    best_epoch: report.best_epoch,
                    train_loss: report.train_loss,
                    validation_loss: report.validation_loss,
                    initial_validation_loss: report.initial_validation_loss,
                };
                progress(&row);
                trace.buffers.push(row);
            }
            buffer.clear();
        }
    }
    Ok((trace, Some(net)))
}
