//! Attention-pooled MIL predictor.
//!
//! ```text
//! h_i = f(x_i)                         embedding (tanh MLP)
//! a_i = W · tanh(V h_i)                attention logit
//! w_i = softmax_i(a)                   attention weight
//! z   = Σ_i w_i h_i                    bag embedding
//! P   = σ(⟨g, z⟩ + g_bias)             bag probability
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::dataset::MilBag;
use super::loss::focal_loss_with_gamma;
use super::model::{Gamma, LossGrad, MilModel};
use super::nn::{dot, glorot_uniform, logistic, Mlp, MlpGrad, MlpTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionDims {
    pub input_dim: usize,
    /// Extractor layer widths; the last entry is the embedding size `m`.
    pub hidden: Vec<usize>,
    pub attention_dim: usize,
}

impl AttentionDims {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![64, 32],
            attention_dim: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionMil {
    pub extractor: Mlp,
    /// `attention_dim x embed_dim`, row-major.
    pub v: Vec<f64>,
    /// `1 x attention_dim`.
    pub w: Vec<f64>,
    pub g: Vec<f64>,
    pub g_bias: f64,
}

/// Intermediates of one forward pass, sufficient for backprop.
#[derive(Clone, Debug)]
pub struct AttentionCache {
    pub traces: Vec<MlpTrace>,
    /// `tanh(V h_i)` per instance.
    pub hidden_att: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AttentionForward {
    pub prob: f64,
    pub weights: Vec<f64>,
    pub cache: AttentionCache,
}

impl AttentionMil {
    /// Glorot-uniform extractor and attention weights, zero biases, zero `g`.
    pub fn new(dims: &AttentionDims, seed: u64) -> Result<Self> {
        if dims.input_dim == 0 || dims.hidden.is_empty() || dims.attention_dim == 0 {
            return Err(Error::invalid(
                "attention model dimensions must be positive",
            ));
        }
        let mut r = rng::stream(seed, 30);
        let mut layer_dims = vec![dims.input_dim];
        layer_dims.extend(&dims.hidden);
        let extractor = Mlp::glorot(&layer_dims, true, &mut r);
        let m = extractor.output_dim();
        let v = glorot_uniform(&mut r, m, dims.attention_dim, dims.attention_dim * m);
        let w = glorot_uniform(&mut r, dims.attention_dim, 1, dims.attention_dim);
        Ok(Self {
            extractor,
            v,
            w,
            g: vec![0.0; m],
            g_bias: 0.0,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.g.len()
    }

    pub fn attention_dim(&self) -> usize {
        self.w.len()
    }

    pub fn forward(&self, bag: &MilBag) -> Result<AttentionForward> {
        bag.check_dim(self.input_dim())?;
        let m = self.embed_dim();
        let traces: Vec<MlpTrace> = bag
            .instances
            .iter()
            .map(|x| self.extractor.forward_trace(x))
            .collect();
        let mut hidden_att = Vec::with_capacity(traces.len());
        let mut logits = Vec::with_capacity(traces.len());
        for t in &traces {
            let h = t.output();
            let u: Vec<f64> = self
                .v
                .chunks_exact(m)
                .map(|row| dot(row, h).tanh())
                .collect();
            logits.push(dot(&self.w, &u));
            hidden_att.push(u);
        }
        let weights = softmax(&logits);
        let mut z = vec![0.0; m];
        for (t, &wi) in traces.iter().zip(&weights) {
            z.iter_mut()
                .zip(t.output())
                .for_each(|(zk, hk)| *zk += wi * hk);
        }
        let prob = logistic(dot(&self.g, &z) + self.g_bias);
        Ok(AttentionForward {
            prob,
            weights,
            cache: AttentionCache {
                traces,
                hidden_att,
                logits,
                z,
            },
        })
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|a| (a - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl MilModel for AttentionMil {
    fn input_dim(&self) -> usize {
        self.extractor.input_dim()
    }

    fn bag_probability(&self, bag: &MilBag) -> Result<f64> {
        Ok(self.forward(bag)?.prob)
    }

    fn loss_and_grad(&self, bag: &MilBag, label: bool, gamma: Gamma<'_>) -> Result<LossGrad> {
        let fwd = self.forward(bag)?;
        let AttentionCache {
            traces,
            hidden_att,
            z,
            ..
        } = &fwd.cache;
        let (m, k) = (self.embed_dim(), self.attention_dim());
        let p = fwd.prob;
        let gamma = gamma.resolve(p, label);
        let (loss, d_prob) = focal_loss_with_gamma(p, label, gamma);

        let d_s = d_prob * p * (1.0 - p);
        let grad_g: Vec<f64> = z.iter().map(|zk| d_s * zk).collect();
        let grad_bias = d_s;
        let d_z: Vec<f64> = self.g.iter().map(|gk| d_s * gk).collect();

        // Softmax backward: d_a_i = w_i (d_w_i - Σ_k w_k d_w_k), d_w_i = <d_z, h_i>.
        let d_w: Vec<f64> = traces.iter().map(|t| dot(&d_z, t.output())).collect();
        let mean_dw: f64 = fwd.weights.iter().zip(&d_w).map(|(w, d)| w * d).sum();

        let mut grad_v = vec![0.0; k * m];
        let mut grad_w = vec![0.0; k];
        let mut grad_f = MlpGrad::zeros(&self.extractor);
        for (i, trace) in traces.iter().enumerate() {
            let h = trace.output();
            let wi = fwd.weights[i];
            let d_a = wi * (d_w[i] - mean_dw);
            let u = &hidden_att[i];
            let mut d_h: Vec<f64> = d_z.iter().map(|dz| wi * dz).collect();
            for r in 0..k {
                grad_w[r] += d_a * u[r];
                let d_pre = d_a * self.w[r] * (1.0 - u[r] * u[r]);
                let row_v = &self.v[r * m..(r + 1) * m];
                let row_g = &mut grad_v[r * m..(r + 1) * m];
                for c in 0..m {
                    row_g[c] += d_pre * h[c];
                    d_h[c] += d_pre * row_v[c];
                }
            }
            self.extractor.backward(trace, &d_h, &mut grad_f);
        }

        let mut grads = grad_f.into_blocks();
        grads.push(grad_v);
        grads.push(grad_w);
        grads.push(grad_g);
        grads.push(vec![grad_bias]);
        Ok(LossGrad {
            loss,
            prob: p,
            gamma,
            grads,
        })
    }

    fn instance_score(&self, x: &[f64]) -> f64 {
        let h = self.extractor.forward(x);
        // Same accumulation as the pooled path with a unit weight, so singleton
        // bags reproduce this value bit for bit.
        let mut z = vec![0.0; h.len()];
        z.iter_mut().zip(&h).for_each(|(zk, hk)| *zk += 1.0 * hk);
        logistic(dot(&self.g, &z) + self.g_bias)
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut b = self.extractor.param_blocks();
        b.push(&self.v);
        b.push(&self.w);
        b.push(&self.g);
        b.push(std::slice::from_ref(&self.g_bias));
        b
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut b = self.extractor.param_blocks_mut();
        b.push(&mut self.v);
        b.push(&mut self.w);
        b.push(&mut self.g);
        b.push(std::slice::from_mut(&mut self.g_bias));
        b
    }
}
