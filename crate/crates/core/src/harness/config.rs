use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::SyntheticConfig;
use crate::hypernet::{Head, TrainConfig, DEFAULT_HIDDEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplaySpec {
    pub interactions: PathBuf,
    pub users: PathBuf,
    pub items: PathBuf,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentSpec {
    Synthetic(SyntheticConfig),
    Replay(ReplaySpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Hyperbandit,
    Linucb,
    Random,
    /// Picks the best candidate under the true expected reward (synthetic only).
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub environment: u64,
    pub hypernet: u64,
    pub embedding: u64,
    /// Mini-batch shuffling, and the choices of the random policy.
    pub training: u64,
    /// The separately seeded random run used for normalization.
    pub baseline: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_master(0)
    }
}

impl Seeds {
    /// Seeds for replicate `k` of a sweep.
    pub fn from_master(k: u64) -> Self {
        Self {
            environment: k,
            hypernet: k,
            embedding: k,
            training: k,
            baseline: k.wrapping_add(1_000_003),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub policy: PolicyKind,
    pub alpha: f64,
    pub lambda: f64,
    pub user_dim: usize,
    pub observed_dim: usize,
    /// `0` turns latent-feature regression off.
    pub latent_dim: usize,
    pub head: Head,
    pub hidden: Vec<usize>,
    /// `false` freezes the hypernetwork at its initialization.
    pub train_hypernet: bool,
    pub buffer_size: usize,
    /// Number of steps; defaults to the full log for replay.
    pub steps: Option<usize>,
    pub training: TrainConfig,
    pub seeds: Seeds,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentSpec::Synthetic(SyntheticConfig::default()),
            policy: PolicyKind::Hyperbandit,
            alpha: 0.1,
            lambda: 0.1,
            user_dim: 25,
            observed_dim: 15,
            latent_dim: 10,
            head: Head::LowRank { rank: 2 },
            hidden: DEFAULT_HIDDEN.to_vec(),
            train_hypernet: true,
            buffer_size: 2000,
            steps: Some(20_000),
            training: TrainConfig::default(),
            seeds: Seeds::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative replay file paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let EnvironmentSpec::Replay(r) = &mut self.environment {
            for p in [&mut r.interactions, &mut r.users, &mut r.items] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    pub fn item_dim(&self) -> usize {
        self.observed_dim + self.latent_dim
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be > 0, got {}", self.lambda));
        }
        if self.policy == PolicyKind::Hyperbandit && self.buffer_size < 10 {
            return fail(format!("buffer_size must be at least 10, got {}", self.buffer_size));
        }
        if self.steps == Some(0) {
            return fail("steps must be positive".into());
        }
        if let Head::LowRank { rank: 0 } = self.head {
            return fail("rank must be positive".into());
        }
        self.training
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        match &self.environment {
            EnvironmentSpec::Synthetic(s) => {
                if s.user_dim != self.user_dim {
                    return fail(format!(
                        "environment user_dim {} != user_dim {}",
                        s.user_dim, self.user_dim
                    ));
                }
                if s.observed_dim != self.observed_dim {
                    return fail(format!(
                        "environment observed_dim {} != observed_dim {}",
                        s.observed_dim, self.observed_dim
                    ));
                }
                if self.steps.is_none() {
                    return fail("steps is required for the synthetic environment".into());
                }
            }
            EnvironmentSpec::Replay(_) => {
                if self.policy == PolicyKind::Oracle {
                    return fail("the oracle policy needs a synthetic environment".into());
                }
            }
        }
        Ok(())
    }
}
