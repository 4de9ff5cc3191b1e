//! Domain types shared by the environments, policies and the hypernetwork.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::period::TimePeriod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContextError {
    #[error("context contains a non-finite entry")]
    NonFinite,
    #[error("expected dimension {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// User feature vector `c_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserContext(Vec<f64>);

impl UserContext {
    pub fn new(values: Vec<f64>) -> Result<Self, ContextError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ContextError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Item feature vector split into the observed part `s_a` and the latent part `x_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemContext {
    observed: Vec<f64>,
    latent: Vec<f64>,
}

impl ItemContext {
    pub fn new(observed: Vec<f64>, latent: Vec<f64>) -> Result<Self, ContextError> {
        if observed.iter().chain(&latent).any(|v| !v.is_finite()) {
            return Err(ContextError::NonFinite);
        }
        Ok(Self { observed, latent })
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn set_latent(&mut self, latent: Vec<f64>) {
        assert_eq!(latent.len(), self.latent.len(), "latent dimension is fixed");
        self.latent = latent;
    }

    pub fn dim(&self) -> usize {
        self.observed.len() + self.latent.len()
    }

    /// `[s_aᵀ, x_aᵀ]ᵀ`.
    pub fn full(&self) -> Vec<f64> {
        let mut v = self.observed.clone();
        v.extend_from_slice(&self.latent);
        v
    }
}

/// Preference matrix `Θ` of shape `d_a × d_u`.
///
/// The top `o_a` rows act on observed item features and the bottom `l_a` rows
/// on latent ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceMatrix(Matrix);

impl PreferenceMatrix {
    pub fn new(matrix: Matrix) -> Self {
        Self(matrix)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn item_dim(&self) -> usize {
        self.0.rows()
    }

    pub fn user_dim(&self) -> usize {
        self.0.cols()
    }

    /// Splits into the observed block (`o_a × d_u`) and latent block (`l_a × d_u`).
    pub fn split(&self, observed_dim: usize) -> Result<(Matrix, Matrix), ContextError> {
        if observed_dim > self.0.rows() {
            return Err(ContextError::Dimension {
                expected: self.0.rows(),
                actual: observed_dim,
            });
        }
        Ok((
            self.0.row_block(0, observed_dim),
            self.0.row_block(observed_dim, self.0.rows()),
        ))
    }

    /// Projects a user context: `Θ c_u`, split as `(Θ^s c_u, Θ^x c_u)`.
    pub fn project_user(
        &self,
        user: &[f64],
        observed_dim: usize,
    ) -> Result<UserProjection, ContextError> {
        if observed_dim > self.0.rows() {
            return Err(ContextError::Dimension {
                expected: self.0.rows(),
                actual: observed_dim,
            });
        }
        let mut w = self.0.matvec(user)?;
        let latent = w.split_off(observed_dim);
        Ok(UserProjection {
            observed: w,
            latent,
        })
    }
}

/// `Θ c_u` split into the part paired with observed features (`Q`) and the
/// part paired with latent features (`P`).
#[derive(Debug, Clone, PartialEq)]
pub struct UserProjection {
    pub observed: Vec<f64>,
    pub latent: Vec<f64>,
}

/// `c_aᵀ Θ c_u`.
pub fn true_reward(user: &[f64], item: &[f64], theta: &Matrix) -> Result<f64, ContextError> {
    Ok(theta.bilinear(item, user)?)
}

/// One logged step: who was served, what was shown and what came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user: UserId,
    pub item: ItemId,
    pub period: TimePeriod,
    pub reward: f64,
    pub candidates: Vec<ItemId>,
}

impl InteractionRecord {
    /// Position of the recommended item in the candidate list.
    pub fn chosen_index(&self) -> Option<usize> {
        self.candidates.iter().position(|c| *c == self.item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_reward_is_squared_norm() {
        let c = [0.5, -1.0, 2.0];
        let r = true_reward(&c, &c, &Matrix::identity(3)).unwrap();
        assert!((r - 5.25).abs() < 1e-15);
    }

    #[test]
    fn zero_user_gives_zero() {
        let theta = Matrix::from_fn(2, 3, |r, c| (r + c) as f64);
        assert_eq!(true_reward(&[0.0; 3], &[1.0, 2.0], &theta).unwrap(), 0.0);
    }

    #[test]
    fn small_bilinear_oracle() {
        let theta = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        // Direct product: (1,1) · [[1,0],[0,2]] · (1,1) = 1 + 2.
        let direct: f64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| 1.0 * theta.get(i, j) * 1.0)
            .sum();
        assert_eq!(true_reward(&[1.0, 1.0], &[1.0, 1.0], &theta).unwrap(), direct);
        assert_eq!(direct, 3.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(true_reward(&[1.0], &[1.0, 1.0], &Matrix::identity(2)).is_err());
        assert!(true_reward(&[1.0, 1.0], &[1.0], &Matrix::identity(2)).is_err());
    }

    #[test]
    fn split_rows_and_restack() {
        let theta = PreferenceMatrix::new(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
        );
        let (s, x) = theta.split(1).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 2.0]);
        assert_eq!(x.as_slice(), &[3.0, 4.0]);
        assert_eq!(&Matrix::vstack(&s, &x).unwrap(), theta.matrix());

        let (s, x) = theta.split(2).unwrap();
        assert_eq!(x.rows(), 0);
        assert_eq!(&s, theta.matrix());
        assert!(theta.split(3).is_err());
    }

    #[test]
    fn non_finite_contexts_rejected() {
        assert!(UserContext::new(vec![1.0, f64::NAN]).is_err());
        assert!(ItemContext::new(vec![1.0], vec![f64::INFINITY]).is_err());
        let item = ItemContext::new(vec![1.0, 2.0], vec![3.0]).unwrap();
        assert_eq!(item.full(), vec![1.0, 2.0, 3.0]);
        assert_eq!(item.dim(), 3);
    }
}
