//! Fully connected ReLU network with manual backpropagation.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{self, streams};

/// One affine layer. `weight` is `fan_in × fan_out`, so a batch `X` maps to `X·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations kept for the backward pass: `activations[0]` is the input,
/// `activations[i]` the (post-ReLU) output of layer `i - 1`; the last entry is
/// the raw network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Xavier-normal standard deviation `sqrt(2 / (fan_in + fan_out))`.
pub fn xavier_std(fan_in: usize, fan_out: usize) -> f64 {
    (2.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        for pair in layers.windows(2) {
            assert_eq!(pair[0].fan_out(), pair[1].fan_in(), "adjacent layer widths differ");
        }
        Self { layers }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Self::from_layers(widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect())
    }

    /// Weights `~ N(0, 2/(fan_in + fan_out))`, biases zero.
    pub fn xavier(widths: &[usize], seed: u64) -> Self {
        let mut rng = rng::stream(seed, streams::XAVIER);
        let layers = widths
            .windows(2)
            .map(|w| {
                let std = xavier_std(w[0], w[1]);
                Layer {
                    weight: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        std * rng.sample::<f64, _>(StandardNormal)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(Layer::fan_in).collect();
        w.extend(self.layers.last().map(Layer::fan_out));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Layer::fan_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::fan_out)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Row-wise forward pass over a batch of inputs.
    pub fn forward(&self, input: Array2<f64>) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&layer.weight);
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    /// Parameter gradients given `d_output = ∂L/∂output` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache, d_output: Array2<f64>) -> Vec<Layer> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_output;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            grads.push(Layer {
                weight: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut prev = delta.dot(&layer.weight.t());
                // ReLU gate: active where the stored post-activation is positive.
                Zip::from(&mut prev).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        grads.reverse();
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_scale_and_zero_bias() {
        assert!((xavier_std(30, 256) - 0.08362).abs() < 1e-5);
        let net = Mlp::xavier(&[30, 256], 1);
        let w = &net.layers()[0].weight;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let std = (w.mapv(|v| (v - mean).powi(2)).sum() / n).sqrt();
        assert!((std / 0.08362 - 1.0).abs() < 0.1, "{std}");
        assert!(net.layers()[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2]);
        let out = net.forward(Array2::ones((2, 3)));
        assert!(out.output().iter().all(|&v| v == 0.0));
        assert_eq!(net.widths(), vec![3, 4, 2]);
        assert_eq!(net.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = Mlp::xavier(&[3, 5, 2], 9);
        let x = Array2::from_shape_fn((2, 3), |(i, j)| (i as f64 + 1.0) * 0.3 - j as f64 * 0.2);
        // L = Σ c ⊙ output for a fixed c.
        let c = Array2::from_shape_fn((2, 2), |(i, j)| 1.0 + i as f64 - 0.5 * j as f64);
        let loss = |m: &Mlp| (m.forward(x.clone()).output() * &c).sum();
        let grads = net.backward(&net.forward(x.clone()), c.clone());
        let h = 1e-6;
        for l in 0..2 {
            for idx in 0..net.layers()[l].weight.len() {
                let (r, col) = (idx / net.layers()[l].fan_out(), idx % net.layers()[l].fan_out());
                let mut plus = net.clone();
                plus.layers_mut()[l].weight[(r, col)] += h;
                let mut minus = net.clone();
                minus.layers_mut()[l].weight[(r, col)] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                assert!((fd - grads[l].weight[(r, col)]).abs() < 1e-6);
            }
        }
    }
}
