//! Hypernetwork mapping a period embedding to a preference matrix `Θ_p`.
//!
//! The network is a ReLU MLP. In low-rank mode its output is reshaped into
//! `A` (`d_a × τ`) and `B` (`d_u × τ`) and `Θ = A·Bᵀ`; in full-rank mode the
//! output is `Θ` itself, row-major.

mod adam;
mod checkpoint;
mod loss;
mod mlp;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{label_entropy, labels_from_step, listnet_loss, listnet_loss_grad, log_softmax, softmax};
pub use mlp::{xavier_std, ForwardCache, Layer, Mlp};
pub use train::{train_on_buffer, TrainConfig, TrainReport};

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::period::{embedding_table, TimePeriod, EMBEDDING_DIM, NUM_PERIODS};
use crate::types::PreferenceMatrix;

/// Hidden widths between the 30-wide input and the output head.
pub const DEFAULT_HIDDEN: [usize; 8] = [256, 512, 1024, 1024, 1024, 1024, 512, 256];

#[derive(Debug, Error)]
pub enum HypernetError {
    #[error("input width {actual} does not match expected {expected}")]
    Width { expected: usize, actual: usize },
    #[error("output length {actual} does not match expected {expected}")]
    OutputLength { expected: usize, actual: usize },
    #[error("buffer of {0} steps is too small to train on (need at least 10)")]
    BufferTooSmall(usize),
    #[error("invalid hypernetwork configuration: {0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("training produced a non-finite loss")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    LowRank { rank: usize },
    Full,
}

impl Head {
    pub fn output_dim(self, item_dim: usize, user_dim: usize) -> usize {
        match self {
            Head::LowRank { rank } => rank * (item_dim + user_dim),
            Head::Full => item_dim * user_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypernetConfig {
    pub hidden: Vec<usize>,
    pub head: Head,
    pub item_dim: usize,
    pub user_dim: usize,
    pub init_seed: u64,
    pub embedding_seed: u64,
}

impl Default for HypernetConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            head: Head::LowRank { rank: 2 },
            item_dim: 25,
            user_dim: 25,
            init_seed: 0,
            embedding_seed: 0,
        }
    }
}

impl HypernetConfig {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![EMBEDDING_DIM];
        w.extend(&self.hidden);
        w.push(self.head.output_dim(self.item_dim, self.user_dim));
        w
    }
}

/// `A` (`d_a × τ`) and `B` (`d_u × τ`) with `Θ = A·Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankOutput {
    pub a: Matrix,
    pub b: Matrix,
}

impl LowRankOutput {
    pub fn theta(&self) -> Matrix {
        self.a
            .matmul(&self.b.transpose())
            .expect("factor ranks agree by construction")
    }

    /// Inverse of [`reshape_lowrank`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.a.as_slice().to_vec();
        v.extend_from_slice(self.b.as_slice());
        v
    }
}

/// First `τ·d_a` entries fill `A` row-major, the remaining `τ·d_u` fill `B`.
pub fn reshape_lowrank(
    out: &[f64],
    rank: usize,
    item_dim: usize,
    user_dim: usize,
) -> Result<LowRankOutput, HypernetError> {
    let expected = rank * (item_dim + user_dim);
    if out.len() != expected {
        return Err(HypernetError::OutputLength {
            expected,
            actual: out.len(),
        });
    }
    let (a, b) = out.split_at(rank * item_dim);
    Ok(LowRankOutput {
        a: Matrix::from_vec(item_dim, rank, a.to_vec()).expect("length checked"),
        b: Matrix::from_vec(user_dim, rank, b.to_vec()).expect("length checked"),
    })
}

/// One buffered step prepared for training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub period: TimePeriod,
    pub user: Vec<f64>,
    /// Candidate contexts `[s_a; x_a]`, one row per candidate.
    pub contexts: Matrix,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Hypernet {
    mlp: Mlp,
    head: Head,
    item_dim: usize,
    user_dim: usize,
    embedding_seed: u64,
    embeddings: Array2<f64>,
}

impl Hypernet {
    pub fn new(config: &HypernetConfig) -> Result<Self, HypernetError> {
        if let Head::LowRank { rank: 0 } = config.head {
            return Err(HypernetError::Config("rank must be positive".into()));
        }
        if config.item_dim == 0 || config.user_dim == 0 || config.hidden.contains(&0) {
            return Err(HypernetError::Config("widths must be positive".into()));
        }
        let mlp = Mlp::xavier(&config.widths(), config.init_seed);
        Self::from_parts(mlp, config.head, config.item_dim, config.user_dim, config.embedding_seed)
    }

    pub fn from_parts(
        mlp: Mlp,
        head: Head,
        item_dim: usize,
        user_dim: usize,
        embedding_seed: u64,
    ) -> Result<Self, HypernetError> {
        if mlp.input_dim() != EMBEDDING_DIM {
            return Err(HypernetError::Width {
                expected: EMBEDDING_DIM,
                actual: mlp.input_dim(),
            });
        }
        let expected = head.output_dim(item_dim, user_dim);
        if mlp.output_dim() != expected {
            return Err(HypernetError::OutputLength {
                expected,
                actual: mlp.output_dim(),
            });
        }
        let table = embedding_table(embedding_seed);
        let embeddings = Array2::from_shape_fn((NUM_PERIODS, EMBEDDING_DIM), |(p, k)| {
            table[p].as_slice()[k]
        });
        Ok(Self {
            mlp,
            head,
            item_dim,
            user_dim,
            embedding_seed,
            embeddings,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn item_dim(&self) -> usize {
        self.item_dim
    }

    pub fn user_dim(&self) -> usize {
        self.user_dim
    }

    pub fn embedding_seed(&self) -> u64 {
        self.embedding_seed
    }

    /// `Θ` from one raw output row.
    pub fn theta_from_output(&self, out: &[f64]) -> Result<Matrix, HypernetError> {
        match self.head {
            Head::LowRank { rank } => Ok(reshape_lowrank(out, rank, self.item_dim, self.user_dim)?.theta()),
            Head::Full => Matrix::from_vec(self.item_dim, self.user_dim, out.to_vec()).map_err(|_| {
                HypernetError::OutputLength {
                    expected: self.item_dim * self.user_dim,
                    actual: out.len(),
                }
            }),
        }
    }

    /// `∂L/∂output` for one row given `G = ∂L/∂Θ`.
    fn output_grad(&self, out: &[f64], g: &Matrix) -> Vec<f64> {
        match self.head {
            Head::LowRank { rank } => {
                let f = reshape_lowrank(out, rank, self.item_dim, self.user_dim)
                    .expect("network output has the head's length");
                let da = g.matmul(&f.b).expect("shapes agree");
                let db = g.transpose().matmul(&f.a).expect("shapes agree");
                LowRankOutput { a: da, b: db }.flatten()
            }
            Head::Full => g.as_slice().to_vec(),
        }
    }

    /// `Θ` for an arbitrary 30-dim input.
    pub fn forward_input(&self, input: &[f64]) -> Result<PreferenceMatrix, HypernetError> {
        if input.len() != EMBEDDING_DIM {
            return Err(HypernetError::Width {
                expected: EMBEDDING_DIM,
                actual: input.len(),
            });
        }
        let x = Array2::from_shape_vec((1, EMBEDDING_DIM), input.to_vec()).expect("length checked");
        let cache = self.mlp.forward(x);
        let row = cache.output().row(0).to_vec();
        Ok(PreferenceMatrix::new(self.theta_from_output(&row)?))
    }

    fn forward_periods(&self, periods: &[TimePeriod]) -> (ForwardCache, Vec<Matrix>) {
        let x = Array2::from_shape_fn((periods.len(), EMBEDDING_DIM), |(i, k)| {
            self.embeddings[(periods[i].index(), k)]
        });
        let cache = self.mlp.forward(x);
        let thetas = cache
            .output()
            .rows()
            .into_iter()
            .map(|r| {
                self.theta_from_output(&r.to_vec())
                    .expect("network output has the head's length")
            })
            .collect();
        (cache, thetas)
    }

    pub fn theta(&self, period: TimePeriod) -> PreferenceMatrix {
        let (_, mut thetas) = self.forward_periods(&[period]);
        PreferenceMatrix::new(thetas.pop().expect("one period in, one out"))
    }

    /// `Θ_p` for all 35 periods, in period order.
    pub fn all_thetas(&self) -> Vec<PreferenceMatrix> {
        let periods: Vec<TimePeriod> = TimePeriod::all().collect();
        self.forward_periods(&periods)
            .1
            .into_iter()
            .map(PreferenceMatrix::new)
            .collect()
    }

    /// Summed ListNet loss over `examples` and, if requested, its gradient
    /// with respect to every weight and bias.
    pub fn loss_and_grad(
        &self,
        examples: &[&TrainingExample],
        with_grad: bool,
    ) -> Result<(f64, Option<Vec<Layer>>), HypernetError> {
        let mut slots: BTreeMap<TimePeriod, usize> = BTreeMap::new();
        for e in examples {
            let next = slots.len();
            slots.entry(e.period).or_insert(next);
        }
        let mut periods = vec![TimePeriod::new(0).expect("valid"); slots.len()];
        for (&p, &i) in &slots {
            periods[i] = p;
        }
        let (cache, thetas) = self.forward_periods(&periods);
        let mut theta_grads: Vec<Matrix> = if with_grad {
            vec![Matrix::zeros(self.item_dim, self.user_dim); periods.len()]
        } else {
            Vec::new()
        };

        let mut total = 0.0;
        for e in examples {
            let slot = slots[&e.period];
            let w = thetas[slot].matvec(&e.user).map_err(|_| HypernetError::Width {
                expected: self.user_dim,
                actual: e.user.len(),
            })?;
            let scores = e.contexts.matvec(&w).map_err(|_| HypernetError::Width {
                expected: self.item_dim,
                actual: e.contexts.cols(),
            })?;
            let (loss, g) = listnet_loss_grad(&e.labels, &scores);
            total += loss;
            if with_grad {
                // ∂L/∂Θ = (Cᵀ g) c_uᵀ
                let v = e.contexts.vecmat(&g).expect("shapes agree");
                theta_grads[slot].add_outer(1.0, &v, &e.user);
            }
        }
        if !total.is_finite() {
            return Err(HypernetError::NonFinite);
        }
        if !with_grad {
            return Ok((total, None));
        }
        let out = cache.output();
        let mut d_out = Array2::zeros(out.raw_dim());
        for (i, g) in theta_grads.iter().enumerate() {
            let row = self.output_grad(&out.row(i).to_vec(), g);
            d_out.row_mut(i).iter_mut().zip(row).for_each(|(d, v)| *d = v);
        }
        Ok((total, Some(self.mlp.backward(&cache, d_out))))
    }

    /// Parameter gradient for a caller-supplied `∂L/∂Θ_p` per period.
    pub fn backward_from_theta_grads(&self, grads: &[(TimePeriod, Matrix)]) -> Vec<Layer> {
        let periods: Vec<TimePeriod> = grads.iter().map(|(p, _)| *p).collect();
        let (cache, _) = self.forward_periods(&periods);
        let out = cache.output();
        let mut d_out = Array2::zeros(out.raw_dim());
        for (i, (_, g)) in grads.iter().enumerate() {
            let row = self.output_grad(&out.row(i).to_vec(), g);
            d_out.row_mut(i).iter_mut().zip(row).for_each(|(d, v)| *d = v);
        }
        self.mlp.backward(&cache, d_out)
    }

    /// Number of singular values of `Θ_p` above `rel · σ₁`.
    pub fn effective_rank(&self, period: TimePeriod, rel: f64) -> usize {
        let sv = linalg::singular_values(self.theta(period).matrix());
        let top = sv.first().copied().unwrap_or(0.0);
        sv.iter().filter(|&&s| s > rel * top).count()
    }
}
