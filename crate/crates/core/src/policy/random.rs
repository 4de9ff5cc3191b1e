use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::PolicyError;
use crate::rng::{self, streams};

/// Uniform choice among the candidates.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::stream(seed, streams::RANDOM_POLICY),
        }
    }

    pub fn choose(&mut self, n: usize) -> Result<usize, PolicyError> {
        if n == 0 {
            return Err(PolicyError::NoCandidates);
        }
        Ok(self.rng.random_range(0..n))
    }
}
