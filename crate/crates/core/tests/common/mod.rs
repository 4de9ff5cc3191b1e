//! Shared fixtures and independent reference computations for the
//! integration tests. Nothing here calls into the library's numerics.
#![allow(dead_code)]

use std::path::Path;

use hyperbandit::env::SyntheticConfig;
use hyperbandit::harness::{EnvironmentSpec, ExperimentConfig, Seeds};
use hyperbandit::hypernet::Head;

/// A run small enough for debug-speed tests.
pub fn small_config(steps: usize) -> ExperimentConfig {
    let env = SyntheticConfig {
        users: 12,
        items: 40,
        user_dim: 6,
        item_dim: 6,
        observed_dim: 4,
        true_rank: 2,
        candidates: 8,
        steps_per_period: 4,
        ..SyntheticConfig::default()
    };
    ExperimentConfig {
        environment: EnvironmentSpec::Synthetic(env),
        user_dim: 6,
        observed_dim: 4,
        latent_dim: 2,
        head: Head::LowRank { rank: 2 },
        hidden: vec![16, 16],
        buffer_size: 100,
        steps: Some(steps),
        seeds: Seeds::from_master(3),
        ..ExperimentConfig::default()
    }
}

/// `xᵀ M y` for a row-major `rows × cols` matrix.
pub fn bilinear(m: &[f64], cols: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            total += xi * m[i * cols + j] * yj;
        }
    }
    total
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let d = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// `Σ_k y_k log softmax(x)_k` negated, written out directly.
pub fn listnet_reference(labels: &[f64], scores: &[f64]) -> f64 {
    let lmax = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let smax = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lz: f64 = labels.iter().map(|y| (y - lmax).exp()).sum();
    let sz: f64 = scores.iter().map(|s| (s - smax).exp()).sum();
    labels
        .iter()
        .zip(scores)
        .map(|(y, s)| -((y - lmax).exp() / lz) * ((s - smax) - sz.ln()))
        .sum()
}

/// Writes a small replay dataset with `items` items and a log of `steps`
/// interactions over the whole week.
pub fn write_replay_fixture(dir: &Path, users: usize, items: usize, steps: usize, dim: usize) {
    let feat = |id: usize, k: usize| ((id * 7 + k * 3) % 11) as f64 / 11.0 - 0.5;
    let table = |n: usize| {
        let mut s = String::from("id");
        for k in 0..dim {
            s.push_str(&format!(",f{k}"));
        }
        s.push('\n');
        for id in 0..n {
            s.push_str(&id.to_string());
            for k in 0..dim {
                s.push_str(&format!(",{}", feat(id, k)));
            }
            s.push('\n');
        }
        s
    };
    std::fs::write(dir.join("users.csv"), table(users)).unwrap();
    std::fs::write(dir.join("items.csv"), table(items)).unwrap();
    let mut log = String::from("step,day_index,minutes,user_id,positive_item_id\n");
    for t in 0..steps {
        let day = t % 7;
        let minutes = (t * 97) % 1440;
        log.push_str(&format!("{t},{day},{minutes},{},{}\n", t % users, (t * 5) % items));
    }
    std::fs::write(dir.join("interactions.csv"), log).unwrap();
}

/// Plain-loop forward pass of a ReLU MLP given `(weight fan_in×fan_out, bias)`
/// per layer as nested vectors.
pub fn mlp_forward(layers: &[(Vec<Vec<f64>>, Vec<f64>)], input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for (k, (w, b)) in layers.iter().enumerate() {
        let mut y = b.clone();
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += xi * w[i][j];
            }
        }
        if k + 1 < layers.len() {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        x = y;
    }
    x
}

/// `Θ = A Bᵀ` where the first `rank·d_a` outputs fill `A` row-major and the
/// rest fill `B` row-major.
pub fn lowrank_theta(out: &[f64], rank: usize, d_a: usize, d_u: usize) -> Vec<f64> {
    let (a, b) = out.split_at(rank * d_a);
    let mut theta = vec![0.0; d_a * d_u];
    for i in 0..d_a {
        for j in 0..d_u {
            theta[i * d_u + j] = (0..rank).map(|k| a[i * rank + k] * b[j * rank + k]).sum();
        }
    }
    theta
}
