//! Dense layers with tanh activations and exact reverse-mode gradients.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Affine map `y = W x + b` with `W` stored row-major as `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Glorot-uniform bound for a `fan_in -> fan_out` map.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn glorot_uniform(rng: &mut Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let a = glorot_bound(fan_in, fan_out);
    (0..len).map(|_| rng.random_range(-a..=a)).collect()
}

impl Dense {
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: glorot_uniform(rng, in_dim, out_dim, in_dim * out_dim),
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        out.extend(
            self.weight
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }
}

/// Stack of dense layers, tanh after every hidden layer and optionally after
/// the last one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activate_last: bool,
}

/// Post-activation outputs of every layer; `activations[0]` is the input.
#[derive(Clone, Debug, Default)]
pub struct MlpTrace {
    pub activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradients shaped like an [`Mlp`]'s layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrad {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpGrad {
    pub fn zeros(mlp: &Mlp) -> Self {
        Self {
            weight: mlp
                .layers
                .iter()
                .map(|l| vec![0.0; l.weight.len()])
                .collect(),
            bias: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`.
    pub fn glorot(dims: &[usize], activate_last: bool, rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        let layers = dims
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        Self {
            layers,
            activate_last,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.activate_last
    }

    pub fn forward_trace(&self, x: &[f64]) -> MlpTrace {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.forward_into(&activations[l], &mut out);
            if self.activated(l) {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        MlpTrace { activations }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if self.activated(l) {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Accumulates parameter gradients for upstream gradient `d_out` (w.r.t.
    /// the trace's output) into `grad`.
    pub fn backward(&self, trace: &MlpTrace, d_out: &[f64], grad: &mut MlpGrad) {
        let mut delta = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if self.activated(l) {
                let y = &trace.activations[l + 1];
                delta.iter_mut().zip(y).for_each(|(d, y)| *d *= 1.0 - y * y);
            }
            let input = &trace.activations[l];
            let gw = &mut grad.weight[l];
            for (o, &d) in delta.iter().enumerate() {
                grad.bias[l][o] += d;
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
                delta = prev;
            }
        }
    }

    pub fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl MlpGrad {
    pub fn into_blocks(self) -> Vec<Vec<f64>> {
        self.weight
            .into_iter()
            .zip(self.bias)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn forward_matches_trace() {
        let mut r = rng::seeded(3);
        let mlp = Mlp::glorot(&[4, 6, 3], false, &mut r);
        let x = [0.3, -1.2, 0.5, 2.0];
        assert_eq!(mlp.forward(&x), mlp.forward_trace(&x).output());
    }

    #[test]
    fn glorot_respects_bound() {
        let mut r = rng::seeded(1);
        let layer = Dense::glorot(10, 6, &mut r);
        let a = glorot_bound(10, 6);
        assert!(layer.weight.iter().all(|w| w.abs() <= a));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::seeded(7);
        let mut mlp = Mlp::glorot(&[3, 5, 2], true, &mut r);
        let x = [0.4, -0.7, 1.1];
        let upstream = [0.6, -1.3];
        let objective = |m: &Mlp| dot(&m.forward(&x), &upstream);
        let trace = mlp.forward_trace(&x);
        let mut grad = MlpGrad::zeros(&mlp);
        mlp.backward(&trace, &upstream, &mut grad);
        let analytic = grad.into_blocks();
        let h = 1e-6;
        for (b, block) in analytic.iter().enumerate() {
            for (k, &want) in block.iter().enumerate() {
                let orig = mlp.param_blocks()[b][k];
                mlp.param_blocks_mut()[b][k] = orig + h;
                let up = objective(&mlp);
                mlp.param_blocks_mut()[b][k] = orig - h;
                let down = objective(&mlp);
                mlp.param_blocks_mut()[b][k] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - want).abs() < 1e-7, "block {b} idx {k}");
            }
        }
    }
}
