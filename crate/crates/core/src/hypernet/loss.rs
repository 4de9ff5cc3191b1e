//! ListNet listwise loss and the click-label rule.

/// `+1` on the recommended item if clicked, `-1` if skipped, `0` elsewhere.
pub fn labels_from_step(num_candidates: usize, chosen: usize, reward: f64) -> Vec<f64> {
    let mut y = vec![0.0; num_candidates];
    y[chosen] = if reward > 0.0 { 1.0 } else { -1.0 };
    y
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    log_softmax(x).into_iter().map(f64::exp).collect()
}

/// `−Σ_k softmax(y)_k · log softmax(r̂)_k`.
pub fn listnet_loss(labels: &[f64], scores: &[f64]) -> f64 {
    assert_eq!(labels.len(), scores.len(), "labels and scores differ in length");
    softmax(labels)
        .iter()
        .zip(log_softmax(scores))
        .map(|(p, lq)| -p * lq)
        .sum()
}

/// Loss and `∂loss/∂r̂ = softmax(r̂) − softmax(y)`.
pub fn listnet_loss_grad(labels: &[f64], scores: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(labels.len(), scores.len(), "labels and scores differ in length");
    let p = softmax(labels);
    let lq = log_softmax(scores);
    let loss = p.iter().zip(&lq).map(|(p, lq)| -p * lq).sum();
    let grad = p.iter().zip(&lq).map(|(p, lq)| lq.exp() - p).collect();
    (loss, grad)
}

/// Entropy of `softmax(y)`, the minimum of the loss over scores.
pub fn label_entropy(labels: &[f64]) -> f64 {
    listnet_loss(labels, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_rule() {
        assert_eq!(labels_from_step(3, 1, 1.0), vec![0.0, 1.0, 0.0]);
        assert_eq!(labels_from_step(3, 1, 0.0), vec![0.0, -1.0, 0.0]);
        for r in [0.0, 1.0] {
            let y = labels_from_step(25, 7, r);
            assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 1);
        }
    }

    #[test]
    fn uniform_is_ln_m() {
        let v = vec![0.0; 25];
        assert!((listnet_loss(&v, &v) - 25f64.ln()).abs() < 1e-10);
        assert!((listnet_loss(&[1.0, -1.0, 0.0], &[0.0; 3]) - 3f64.ln()).abs() < 1e-12);
        // ln 3 ≈ 1.09861
        assert!((3f64.ln() - 1.09861).abs() < 1e-5);
    }

    #[test]
    fn shift_invariance_and_overflow_guard() {
        let y = [1.0, -1.0, 0.0, 0.0];
        let r = [0.3, -2.0, 1.5, 0.0];
        let base = listnet_loss(&y, &r);
        for c in [-50.0, -3.3, 0.0, 17.0, 50.0] {
            let shifted: Vec<f64> = r.iter().map(|v| v + c).collect();
            assert!((listnet_loss(&y, &shifted) - base).abs() < 1e-10);
        }
        assert!(listnet_loss(&y, &[1e6, -1e6, 0.0, 0.0]).is_finite());
    }

    #[test]
    fn grad_sums_to_zero_and_matches_fd() {
        let y = [0.0, 1.0, 0.0];
        let r = [0.2, -0.1, 0.7];
        let (loss, g) = listnet_loss_grad(&y, &r);
        assert!((loss - listnet_loss(&y, &r)).abs() < 1e-15);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        let h = 1e-6;
        for k in 0..3 {
            let mut p = r;
            p[k] += h;
            let mut m = r;
            m[k] -= h;
            let fd = (listnet_loss(&y, &p) - listnet_loss(&y, &m)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn minimum_at_labels() {
        let y = [1.0, 0.0, 0.0, -1.0];
        let h = label_entropy(&y);
        assert!((listnet_loss(&y, &[3.0, 2.0, 2.0, 1.0]) - h).abs() < 1e-12);
        assert!(listnet_loss(&y, &[0.0; 4]) > h);
    }
}
