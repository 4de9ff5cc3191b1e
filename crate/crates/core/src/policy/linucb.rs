//! LinUCB with one shared ridge model over `z = [c_u; s_a]`.

use super::{exploration, select, PolicyError, RESOLVE_EVERY};
use crate::env::Step;
use crate::linalg::{self, Matrix, SpdSystem};

#[derive(Debug, Clone)]
pub struct LinUcb {
    alpha: f64,
    lambda: f64,
    a: Matrix,
    a_inv: Matrix,
    b: Vec<f64>,
    theta: Vec<f64>,
    updates: usize,
}

impl LinUcb {
    pub fn new(dim: usize, alpha: f64, lambda: f64) -> Result<Self, PolicyError> {
        if !(alpha >= 0.0 && alpha.is_finite()) || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PolicyError::Config(format!(
                "need alpha >= 0 and lambda > 0, got {alpha}, {lambda}"
            )));
        }
        let mut a = Matrix::zeros(dim, dim);
        a.add_diag(lambda);
        Ok(Self {
            alpha,
            lambda,
            a,
            a_inv: Matrix::diag(&vec![1.0 / lambda; dim]),
            b: vec![0.0; dim],
            theta: vec![0.0; dim],
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Ridge estimate `A⁻¹ b`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn features(user: &[f64], observed: &[f64]) -> Vec<f64> {
        let mut z = user.to_vec();
        z.extend_from_slice(observed);
        z
    }

    pub fn score(&self, z: &[f64]) -> Result<f64, PolicyError> {
        let mean = linalg::dot(z, &self.theta);
        Ok(mean + exploration(self.alpha, self.a_inv.bilinear(z, z)?)?)
    }

    pub fn scores(&self, step: &Step) -> Result<Vec<f64>, PolicyError> {
        step.candidates
            .iter()
            .map(|c| self.score(&Self::features(&step.user_context, &c.observed)))
            .collect()
    }

    pub fn choose(&self, step: &Step) -> Result<usize, PolicyError> {
        select(&self.scores(step)?)
    }

    pub fn update(&mut self, z: &[f64], reward: f64) -> Result<(), PolicyError> {
        self.a.add_outer(1.0, z, z);
        linalg::axpy(reward, z, &mut self.b);
        self.updates += 1;
        if self.updates % RESOLVE_EVERY == 0 {
            self.a_inv = SpdSystem::new(self.a.clone())?.inverse();
        } else {
            linalg::sherman_morrison_in_place(&mut self.a_inv, z)?;
        }
        self.theta = self.a_inv.matvec(&self.b)?;
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}
