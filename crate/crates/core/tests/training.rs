use hyperbandit::hypernet::{Adam, AdamConfig, Head, Hypernet, HypernetConfig};
use hyperbandit::linalg::Matrix;
use hyperbandit::period::NUM_PERIODS;
use hyperbandit::rng;
use hyperbandit::TimePeriod;
use rand_distr::{Distribution, StandardNormal};

const D: usize = 6;
const PAIRS: usize = 24;

fn gaussian(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Rank-2 target with unit Frobenius norm.
fn target(rng: &mut impl rand::Rng) -> Vec<f64> {
    let (u, v) = (gaussian(rng, D * 2), gaussian(rng, D * 2));
    let mut m: Vec<f64> = (0..D * D)
        .map(|ij| (0..2).map(|k| u[(ij / D) * 2 + k] * v[(ij % D) * 2 + k]).sum())
        .collect();
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    m.iter_mut().for_each(|x| *x /= norm);
    m
}

fn reward(theta: &[f64], item: &[f64], user: &[f64]) -> f64 {
    (0..D).map(|i| (0..D).map(|j| item[i] * theta[i * D + j] * user[j]).sum::<f64>()).sum()
}

#[test]
fn regression_on_fixed_targets_cuts_error_tenfold() {
    let mut g = rng::stream(11, 0);
    let targets: Vec<Vec<f64>> = (0..NUM_PERIODS).map(|_| target(&mut g)).collect();
    let pairs: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..NUM_PERIODS)
        .map(|_| (0..PAIRS).map(|_| (gaussian(&mut g, D), gaussian(&mut g, D))).collect())
        .collect();

    let mut net = Hypernet::new(&HypernetConfig {
        hidden: vec![64, 64],
        head: Head::LowRank { rank: 2 },
        item_dim: D,
        user_dim: D,
        init_seed: 5,
        embedding_seed: 5,
    })
    .unwrap();
    let mut adam = Adam::new(
        net.mlp(),
        AdamConfig {
            learning_rate: 3e-3,
            ..AdamConfig::default()
        },
    );

    // Mean over periods of the mean absolute reward error.
    let error = |net: &Hypernet| {
        let thetas = net.all_thetas();
        let mut total = 0.0;
        for p in 0..NUM_PERIODS {
            let est = thetas[p].matrix().as_slice();
            total += pairs[p]
                .iter()
                .map(|(a, u)| (reward(est, a, u) - reward(&targets[p], a, u)).abs())
                .sum::<f64>()
                / PAIRS as f64;
        }
        total / NUM_PERIODS as f64
    };

    let initial = error(&net);
    let mut best = initial;
    for _ in 0..500 {
        let thetas = net.all_thetas();
        let grads: Vec<(TimePeriod, Matrix)> = (0..NUM_PERIODS)
            .map(|p| {
                let est = thetas[p].matrix().as_slice();
                let mut grad = Matrix::zeros(D, D);
                for (a, u) in &pairs[p] {
                    let residual = reward(est, a, u) - reward(&targets[p], a, u);
                    grad.add_outer(2.0 * residual / (PAIRS * NUM_PERIODS) as f64, a, u);
                }
                (TimePeriod::new(p).unwrap(), grad)
            })
            .collect();
        let layer_grads = net.backward_from_theta_grads(&grads);
        adam.step(net.mlp_mut(), &layer_grads);
        best = best.min(error(&net));
        if best * 10.0 <= initial {
            break;
        }
    }
    assert!(best * 10.0 <= initial, "error {initial} -> {best}");
}
