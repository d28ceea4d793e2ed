//! Mean-pooled instance classifier (mi-Net): `P = (1/n) Σ_i σ(f(x_i))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::dataset::MilBag;
use super::loss::focal_loss_with_gamma;
use super::model::{Gamma, LossGrad, MilModel};
use super::nn::{logistic, Mlp, MlpGrad};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiNet {
    /// Ends in a single linear unit; the logistic is applied on top.
    pub classifier: Mlp,
}

impl MiNet {
    /// `hidden` widths between the input and the terminal unit.
    pub fn new(input_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("mi-Net dimensions must be positive"));
        }
        let mut r = rng::stream(seed, 31);
        let mut dims = vec![input_dim];
        dims.extend(hidden);
        dims.push(1);
        Ok(Self {
            classifier: Mlp::glorot(&dims, false, &mut r),
        })
    }

    pub fn with_default_hidden(input_dim: usize, seed: u64) -> Result<Self> {
        Self::new(input_dim, &[64, 32], seed)
    }

    /// Activations of the last hidden layer.
    pub fn penultimate(&self, x: &[f64]) -> Vec<f64> {
        let trace = self.classifier.forward_trace(x);
        let n = trace.activations.len();
        trace.activations[n - 2].clone()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.classifier.forward(x)[0]
    }
}

impl MilModel for MiNet {
    fn input_dim(&self) -> usize {
        self.classifier.input_dim()
    }

    fn bag_probability(&self, bag: &MilBag) -> Result<f64> {
        bag.check_dim(self.input_dim())?;
        let sum: f64 = bag.instances.iter().map(|x| self.instance_score(x)).sum();
        Ok(sum / bag.len() as f64)
    }

    fn loss_and_grad(&self, bag: &MilBag, label: bool, gamma: Gamma<'_>) -> Result<LossGrad> {
        bag.check_dim(self.input_dim())?;
        let traces: Vec<_> = bag
            .instances
            .iter()
            .map(|x| self.classifier.forward_trace(x))
            .collect();
        let scores: Vec<f64> = traces.iter().map(|t| logistic(t.output()[0])).collect();
        let n = bag.len() as f64;
        let p = scores.iter().sum::<f64>() / n;
        let gamma = gamma.resolve(p, label);
        let (loss, d_prob) = focal_loss_with_gamma(p, label, gamma);
        let mut grad = MlpGrad::zeros(&self.classifier);
        for (t, &f) in traces.iter().zip(&scores) {
            let d_logit = d_prob / n * f * (1.0 - f);
            self.classifier.backward(t, &[d_logit], &mut grad);
        }
        Ok(LossGrad {
            loss,
            prob: p,
            gamma,
            grads: grad.into_blocks(),
        })
    }

    fn instance_score(&self, x: &[f64]) -> f64 {
        logistic(self.logit(x))
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        self.classifier.param_blocks()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.classifier.param_blocks_mut()
    }
}
