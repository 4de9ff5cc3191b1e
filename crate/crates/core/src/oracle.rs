//! Brute-force reference computations for unit tests.

use crate::types::UserProjection;

/// Gauss–Jordan inverse with partial pivoting.
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
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
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

pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    invert(a)
        .iter()
        .map(|row| row.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect()
}

/// Minimizer of `Σ (r − Qᵀs − Pᵀx)² + λ‖x‖²` from the normal equations.
pub fn ridge_minimizer(
    history: &[(UserProjection, Vec<f64>, f64)],
    latent_dim: usize,
    lambda: f64,
) -> Vec<f64> {
    let mut a = vec![vec![0.0; latent_dim]; latent_dim];
    let mut b = vec![0.0; latent_dim];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = lambda;
    }
    for (proj, s, r) in history {
        let q: f64 = proj.observed.iter().zip(s).map(|(x, y)| x * y).sum();
        let p = &proj.latent;
        for i in 0..latent_dim {
            b[i] += p[i] * (r - q);
            for j in 0..latent_dim {
                a[i][j] += p[i] * p[j];
            }
        }
    }
    solve(&a, &b)
}
