//! Synthetic periodic environment with a known, low-rank ground truth.
//!
//! Each period `p` has a rank-`R` preference matrix `Θ_p* = U Q_p Vᵀ` where
//! `U` (`d_a × R`) and `V` (`d_u × R`) are fixed orthonormal "taste" bases and
//! `Q_p` is a random `R × R` rotation, so users keep their identity across the
//! week while the item directions they favour rotate from period to period.
//! Contexts are a unit "taste" vector in the taste subspace plus isotropic
//! noise in its orthogonal complement. Expected rewards are mapped onto
//! `[0, 1]` by one global affine rescale: `r* = c_aᵀ Θ_p* c_u + offset`.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Candidate, EnvError, Environment, Step};
use crate::linalg::{self, Matrix};
use crate::period::{TimePeriod, NUM_PERIODS};
use crate::rng::{self, streams};
use crate::types::{ItemId, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    pub user_dim: usize,
    pub item_dim: usize,
    /// Leading item features revealed to the policy (`o_a`).
    pub observed_dim: usize,
    pub true_rank: usize,
    pub candidates: usize,
    pub steps_per_period: usize,
    /// Norm of the off-taste component of every context, relative to the unit taste part.
    pub context_noise: f64,
    /// Fraction of the item taste subspace carried by the observed features.
    /// `None` leaves the split to the random basis.
    pub observed_taste_share: Option<f64>,
    /// Set from the experiment's seeds rather than read from configuration.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users: 50,
            items: 300,
            user_dim: 25,
            item_dim: 25,
            observed_dim: 15,
            true_rank: 2,
            candidates: 25,
            steps_per_period: 10,
            context_noise: 1.0,
            observed_taste_share: None,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |m: String| Err(EnvError::Config(m));
        if self.users == 0 {
            return fail("users must be positive".into());
        }
        if self.candidates == 0 {
            return fail("candidates must be positive".into());
        }
        if self.items < self.candidates {
            return fail(format!(
                "item pool of {} is smaller than the candidate set size {}",
                self.items, self.candidates
            ));
        }
        if self.observed_dim > self.item_dim {
            return fail(format!(
                "observed_dim {} exceeds item_dim {}",
                self.observed_dim, self.item_dim
            ));
        }
        if self.true_rank == 0 || self.true_rank > self.item_dim.min(self.user_dim) {
            return fail(format!(
                "true_rank {} must be in 1..={}",
                self.true_rank,
                self.item_dim.min(self.user_dim)
            ));
        }
        if self.steps_per_period == 0 {
            return fail("steps_per_period must be positive".into());
        }
        if !(self.context_noise.is_finite() && self.context_noise >= 0.0) {
            return fail("context_noise must be finite and non-negative".into());
        }
        if let Some(f) = self.observed_taste_share {
            let latent = self.item_dim - self.observed_dim;
            let ok = (0.0..=1.0).contains(&f)
                && (f < 1.0 || self.observed_dim > 0)
                && (f > 0.0 || latent > 0);
            if !ok {
                return fail(format!("observed_taste_share {f} is not attainable"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    config: SyntheticConfig,
    /// Rescaled `Θ_p*`, one per period.
    thetas: Vec<Matrix>,
    offset: f64,
    users: Vec<Vec<f64>>,
    items: Vec<Vec<f64>>,
    /// `r*` indexed by `[period][user][item]`.
    expected: Vec<f64>,
    feedback_rng: ChaCha8Rng,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::norm2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `basis[:, ..k] · coeffs`.
fn combine(basis: &Matrix, offset: usize, coeffs: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &basis.row(r)[offset..offset + coeffs.len()];
        *o += linalg::dot(row, coeffs);
    }
}

/// Context = taste part in the first `rank` basis columns + noise in the rest.
fn draw_context(rng: &mut ChaCha8Rng, basis: &Matrix, rank: usize, noise: f64) -> Vec<f64> {
    let dim = basis.rows();
    let mut c = vec![0.0; dim];
    let taste = unit_vector(rng, rank);
    combine(basis, 0, &taste, &mut c);
    let rest = dim - rank;
    if rest > 0 {
        let scale = noise / (rest as f64).sqrt();
        let n: Vec<f64> = (0..rest)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        combine(basis, rank, &n, &mut c);
    }
    c
}

impl SyntheticEnv {
    pub fn new(config: SyntheticConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let cfg = &config;
        let r = cfg.true_rank;
        let mut rng = rng::stream(cfg.seed, streams::ENV_STRUCTURE);

        let mut g = gaussian(&mut rng, cfg.item_dim, cfg.item_dim);
        if let Some(share) = cfg.observed_taste_share {
            let latent = cfg.item_dim - cfg.observed_dim;
            for row in 0..cfg.item_dim {
                let w = if row < cfg.observed_dim {
                    (share / cfg.observed_dim.max(1) as f64).sqrt()
                } else {
                    ((1.0 - share) / latent.max(1) as f64).sqrt()
                };
                for col in 0..r {
                    g.set(row, col, g.get(row, col) * w);
                }
            }
        }
        let construction = |e: linalg::LinalgError| EnvError::Construction(e.to_string());
        let u = linalg::orthonormal_columns(&g).map_err(construction)?;
        let v = linalg::orthonormal_columns(&gaussian(&mut rng, cfg.user_dim, cfg.user_dim))
            .map_err(construction)?;
        let u_taste = Matrix::from_fn(cfg.item_dim, r, |i, j| u.get(i, j));
        let v_taste_t = Matrix::from_fn(r, cfg.user_dim, |i, j| v.get(j, i));

        let mut raw_thetas = Vec::with_capacity(NUM_PERIODS);
        for _ in 0..NUM_PERIODS {
            let q = linalg::orthonormal_columns(&gaussian(&mut rng, r, r)).map_err(construction)?;
            let theta = u_taste
                .matmul(&q)
                .and_then(|m| m.matmul(&v_taste_t))
                .map_err(construction)?;
            raw_thetas.push(theta);
        }

        let items: Vec<Vec<f64>> = (0..cfg.items)
            .map(|_| draw_context(&mut rng, &u, r, cfg.context_noise))
            .collect();
        let users: Vec<Vec<f64>> = (0..cfg.users)
            .map(|_| draw_context(&mut rng, &v, r, cfg.context_noise))
            .collect();

        // Exhaustive scan of raw rewards over periods × users × items.
        let mut raw = Vec::with_capacity(NUM_PERIODS * cfg.users * cfg.items);
        for theta in &raw_thetas {
            for user in &users {
                let w = theta.matvec(user).map_err(construction)?;
                raw.extend(items.iter().map(|item| linalg::dot(item, &w)));
            }
        }
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi - lo > 1e-12) || !lo.is_finite() || !hi.is_finite() {
            return Err(EnvError::Construction(
                "true rewards are constant; cannot normalize".into(),
            ));
        }
        let scale = 1.0 / (hi - lo);
        let offset = -lo * scale;
        let expected: Vec<f64> = raw
            .iter()
            .map(|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect();
        let thetas: Vec<Matrix> = raw_thetas.iter().map(|t| t.scale(scale)).collect();

        for (p, theta) in thetas.iter().enumerate() {
            let rank = linalg::numerical_rank(theta, linalg::TOLERANCE);
            if rank != r {
                return Err(EnvError::Construction(format!(
                    "period {p} ground truth has rank {rank}, expected {r}"
                )));
            }
        }

        let feedback_rng = rng::stream(cfg.seed, streams::ENV_FEEDBACK);
        Ok(Self {
            config,
            thetas,
            offset,
            users,
            items,
            expected,
            feedback_rng,
        })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    /// Normalized ground truth `Θ_p*`.
    pub fn theta(&self, period: TimePeriod) -> &Matrix {
        &self.thetas[period.index()]
    }

    /// Constant added to `c_aᵀ Θ_p* c_u` by the normalization.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn user_context(&self, user: UserId) -> Option<&[f64]> {
        self.users.get(user.0 as usize).map(Vec::as_slice)
    }

    /// Full true item context `[s_a; x_a*]`.
    pub fn item_context(&self, item: ItemId) -> Option<&[f64]> {
        self.items.get(item.0 as usize).map(Vec::as_slice)
    }

    /// `r*(u, a, p)` from the construction-time table.
    pub fn expected_reward(&self, period: TimePeriod, user: UserId, item: ItemId) -> f64 {
        let (nu, ni) = (self.users.len(), self.items.len());
        self.expected[(period.index() * nu + user.0 as usize) * ni + item.0 as usize]
    }

    /// Smallest and largest entry of the expected-reward table.
    pub fn reward_range(&self) -> (f64, f64) {
        let lo = self.expected.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Bernoulli draw with success probability `r*`, using the uniform assigned to step `t`.
    ///
    /// Every step owns one uniform, so two policies facing the same step see
    /// correlated feedback regardless of what they chose earlier.
    fn bernoulli(&mut self, t: usize, p: f64) -> f64 {
        // One f64 consumes one u64 = two 32-bit words.
        self.feedback_rng.set_word_pos(2 * t as u128);
        let u: f64 = self.feedback_rng.random();
        if u < p {
            1.0
        } else {
            0.0
        }
    }
}

impl Environment for SyntheticEnv {
    fn user_dim(&self) -> usize {
        self.config.user_dim
    }

    fn observed_dim(&self) -> usize {
        self.config.observed_dim
    }

    fn candidates_per_step(&self) -> usize {
        self.config.candidates
    }

    fn horizon(&self) -> Option<usize> {
        None
    }

    fn step(&mut self, t: usize) -> Result<Step, EnvError> {
        let mut rng = rng::stream(self.config.seed, streams::STEP_BASE + t as u64);
        let user = rng.random_range(0..self.users.len());
        let o = self.config.observed_dim;
        let candidates = sample(&mut rng, self.items.len(), self.config.candidates)
            .into_iter()
            .map(|a| Candidate {
                item: ItemId(a as u64),
                observed: self.items[a][..o].to_vec(),
            })
            .collect();
        Ok(Step {
            t,
            user: UserId(user as u64),
            user_context: self.users[user].clone(),
            period: TimePeriod::from_schedule(t, self.config.steps_per_period),
            candidates,
        })
    }

    fn feedback(&mut self, step: &Step, chosen: usize) -> Result<f64, EnvError> {
        let cand = step.candidates.get(chosen).ok_or(EnvError::BadChoice {
            index: chosen,
            len: step.candidates.len(),
        })?;
        let p = self.expected_reward(step.period, step.user, cand.item);
        Ok(self.bernoulli(step.t, p))
    }

    fn expected_rewards(&self, step: &Step) -> Option<Vec<f64>> {
        Some(
            step.candidates
                .iter()
                .map(|c| self.expected_reward(step.period, step.user, c.item))
                .collect(),
        )
    }
}
