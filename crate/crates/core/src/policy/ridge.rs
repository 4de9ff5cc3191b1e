//! Per-item ridge regression on latent features with UCB exploration.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{exploration, select, PolicyError, RESOLVE_EVERY};
use crate::env::Step;
use crate::linalg::{self, Matrix, SpdSystem};
use crate::types::{ItemId, PreferenceMatrix, UserProjection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub observed_dim: usize,
    pub latent_dim: usize,
    pub user_dim: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            lambda: 0.1,
            observed_dim: 15,
            latent_dim: 10,
            user_dim: 25,
        }
    }
}

impl PolicyConfig {
    pub fn item_dim(&self) -> usize {
        self.observed_dim + self.latent_dim
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(PolicyError::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(PolicyError::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Splits `Θ` into `(Θ^s, Θ^x)` at `observed_dim` rows.
pub fn split_theta(
    theta: &PreferenceMatrix,
    observed_dim: usize,
    latent_dim: usize,
) -> Result<(Matrix, Matrix), PolicyError> {
    if theta.item_dim() != observed_dim + latent_dim {
        return Err(PolicyError::Config(format!(
            "preference matrix has {} rows, expected {}",
            theta.item_dim(),
            observed_dim + latent_dim
        )));
    }
    theta
        .split(observed_dim)
        .map_err(|e| PolicyError::Config(e.to_string()))
}

/// Online ridge statistics for one item's latent features.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    phi: Matrix,
    psi_inv: Matrix,
    b: Vec<f64>,
    x: Vec<f64>,
    updates: usize,
}

impl ArmStats {
    pub fn new(latent_dim: usize, lambda: f64) -> Self {
        Self {
            phi: Matrix::zeros(latent_dim, latent_dim),
            psi_inv: Matrix::diag(&vec![1.0 / lambda; latent_dim]),
            b: vec![0.0; latent_dim],
            x: vec![0.0; latent_dim],
            updates: 0,
        }
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn psi_inv(&self) -> &Matrix {
        &self.psi_inv
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Current latent feature estimate `x_a = Ψ⁻¹ b`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// `Pᵀ Ψ⁻¹ P`.
    pub fn radicand(&self, p: &[f64]) -> Result<f64, PolicyError> {
        Ok(self.psi_inv.bilinear(p, p)?)
    }

    /// Folds one observation in: `Φ += PPᵀ`, `b += P (r − Qᵀ s_a)`.
    pub fn update(
        &mut self,
        proj: &UserProjection,
        observed: &[f64],
        reward: f64,
        lambda: f64,
    ) -> Result<(), PolicyError> {
        let p = &proj.latent;
        let residual = reward - linalg::dot(&proj.observed, observed);
        self.phi.add_outer(1.0, p, p);
        linalg::axpy(residual, p, &mut self.b);
        self.updates += 1;
        if self.updates % RESOLVE_EVERY == 0 {
            let mut psi = self.phi.clone();
            psi.add_diag(lambda);
            self.psi_inv = SpdSystem::new(psi)?.inverse();
        } else {
            linalg::sherman_morrison_in_place(&mut self.psi_inv, p)?;
        }
        self.x = self.psi_inv.matvec(&self.b)?;
        Ok(())
    }
}

/// `[s_a; x_a]ᵀ Θ c_u + α·sqrt((Θ^x c_u)ᵀ Ψ⁻¹ (Θ^x c_u))`, with `Θ c_u`
/// precomputed as `proj`.
pub fn ucb_score(
    proj: &UserProjection,
    observed: &[f64],
    arm: &ArmStats,
    alpha: f64,
) -> Result<f64, PolicyError> {
    let mean = linalg::dot(observed, &proj.observed) + linalg::dot(arm.x(), &proj.latent);
    Ok(mean + exploration(alpha, arm.radicand(&proj.latent)?)?)
}

/// Ridge-UCB state across all items seen so far.
#[derive(Debug, Clone)]
pub struct HyperBanditPolicy {
    config: PolicyConfig,
    arms: HashMap<ItemId, ArmStats>,
    fresh: ArmStats,
}

impl HyperBanditPolicy {
    pub fn new(config: PolicyConfig) -> Result<Self, PolicyError> {
        config.validate()?;
        Ok(Self {
            config,
            arms: HashMap::new(),
            fresh: ArmStats::new(config.latent_dim, config.lambda),
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn arm(&self, item: ItemId) -> &ArmStats {
        self.arms.get(&item).unwrap_or(&self.fresh)
    }

    /// Latent feature estimate, zero for unseen items.
    pub fn latent(&self, item: ItemId) -> &[f64] {
        self.arm(item).x()
    }

    /// `Θ c_u` for the step's user.
    pub fn project(&self, theta: &PreferenceMatrix, user: &[f64]) -> Result<UserProjection, PolicyError> {
        if theta.item_dim() != self.config.item_dim() {
            return Err(PolicyError::Config(format!(
                "preference matrix has {} rows, expected {}",
                theta.item_dim(),
                self.config.item_dim()
            )));
        }
        theta
            .project_user(user, self.config.observed_dim)
            .map_err(|e| PolicyError::Config(e.to_string()))
    }

    pub fn scores(&self, step: &Step, proj: &UserProjection) -> Result<Vec<f64>, PolicyError> {
        step.candidates
            .iter()
            .map(|c| ucb_score(proj, &c.observed, self.arm(c.item), self.config.alpha))
            .collect()
    }

    pub fn choose(&self, step: &Step, proj: &UserProjection) -> Result<usize, PolicyError> {
        select(&self.scores(step, proj)?)
    }

    pub fn update(
        &mut self,
        item: ItemId,
        proj: &UserProjection,
        observed: &[f64],
        reward: f64,
    ) -> Result<(), PolicyError> {
        let (l, lambda) = (self.config.latent_dim, self.config.lambda);
        self.arms
            .entry(item)
            .or_insert_with(|| ArmStats::new(l, lambda))
            .update(proj, observed, reward, lambda)
    }
}
