//! Buffered hypernetwork training with early stopping.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, AdamConfig, Hypernet, HypernetError, TrainingExample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Fraction of the buffer, taken from its tail, held out for early stopping.
    pub validation_fraction: f64,
    pub patience: usize,
    /// Steps per gradient update; `None` uses the whole training split.
    pub batch_size: Option<usize>,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            validation_fraction: 0.1,
            patience: 3,
            batch_size: Some(100),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HypernetError> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(HypernetError::Config(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.patience == 0 || self.max_epochs == 0 {
            return Err(HypernetError::Config("patience and max_epochs must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(HypernetError::Config("batch_size must be positive".into()));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(HypernetError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Epochs run, including the ones that failed to improve.
    pub epochs: usize,
    /// Epoch whose parameters were kept (0 = untouched).
    pub best_epoch: usize,
    /// Mean per-step loss on the training split with the kept parameters.
    pub train_loss: f64,
    /// Mean per-step validation loss with the kept parameters.
    pub validation_loss: f64,
    pub initial_validation_loss: f64,
}

/// Trains on one buffer and leaves `net` at the best-validation parameters.
///
/// The last `⌈fraction·n⌉` steps form the validation split. Each epoch
/// shuffles the training split, takes Adam steps on mini-batches, and then
/// scores the validation split; training stops after `patience` epochs in a
/// row without a strict improvement.
pub fn train_on_buffer(
    net: &mut Hypernet,
    adam: &mut Adam,
    buffer: &[TrainingExample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainReport, HypernetError> {
    config.validate()?;
    let n = buffer.len();
    if n < 10 {
        return Err(HypernetError::BufferTooSmall(n));
    }
    let n_val = ((config.validation_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let (train, val) = buffer.split_at(n - n_val);
    let val_refs: Vec<&TrainingExample> = val.iter().collect();
    let val_loss = |net: &Hypernet| -> Result<f64, HypernetError> {
        Ok(net.loss_and_grad(&val_refs, false)?.0 / n_val as f64)
    };

    let initial = val_loss(net)?;
    let mut best = initial;
    let mut best_mlp = net.mlp().clone();
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs = 0;
    let batch = config.batch_size.unwrap_or(train.len()).min(train.len());
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        epochs = epoch;
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let refs: Vec<&TrainingExample> = chunk.iter().map(|&i| &train[i]).collect();
            let (_, grads) = net.loss_and_grad(&refs, true)?;
            adam.step(net.mlp_mut(), &grads.expect("gradient requested"));
        }
        let v = val_loss(net)?;
        if v < best {
            best = v;
            best_mlp = net.mlp().clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    *net.mlp_mut() = best_mlp;
    let train_refs: Vec<&TrainingExample> = train.iter().collect();
    let train_loss = net.loss_and_grad(&train_refs, false)?.0 / train.len() as f64;
    Ok(TrainReport {
        epochs,
        best_epoch,
        train_loss,
        validation_loss: best,
        initial_validation_loss: initial,
    })
}
