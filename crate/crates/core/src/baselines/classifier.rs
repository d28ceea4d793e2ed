//! Supervised instance classifier shared by both baselines: the mi-Net trunk
//! fitted directly on (noisy) per-cell labels with binary cross-entropy.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mil::{logistic, Adam, MiNet, MilModel, MlpGrad};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            epochs: 5,
            batch_size: 32,
            lr: 1e-3,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid(
                "classifier epochs and batch_size must be positive",
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid("classifier lr must be positive"));
        }
        Ok(())
    }
}

/// Mini-batch Adam on mean binary cross-entropy of the logistic output.
pub fn fit_classifier(
    inputs: &[&[f64]],
    labels: &[bool],
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<MiNet> {
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::invalid(
            "classifier needs matching, non-empty inputs and labels",
        ));
    }
    let dim = inputs[0].len();
    let mut model = MiNet::new(dim, &cfg.hidden, rng::derive_seed(seed, 40))?;
    let sizes: Vec<usize> = model.param_blocks().iter().map(|b| b.len()).collect();
    let mut adam = Adam::new(&sizes);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut r = rng::stream(seed, 41);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = MlpGrad::zeros(&model.classifier);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let trace = model.classifier.forward_trace(inputs[i]);
                let p = logistic(trace.output()[0]);
                let target = if labels[i] { 1.0 } else { 0.0 };
                model
                    .classifier
                    .backward(&trace, &[(p - target) * scale], &mut grad);
            }
            let grads = grad.into_blocks();
            adam.step(&mut model.param_blocks_mut(), &grads, cfg.lr);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_linearly_separable_points() {
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = i as f64 / 200.0;
                vec![if i % 2 == 0 { 1.5 } else { -1.5 } + t - 0.5, t]
            })
            .collect();
        let labels: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let cfg = ClassifierConfig {
            epochs: 20,
            ..ClassifierConfig::default()
        };
        let m = fit_classifier(&refs, &labels, &cfg, 3).unwrap();
        let correct = refs
            .iter()
            .zip(&labels)
            .filter(|(x, &y)| (m.instance_score(x) > 0.5) == y)
            .count();
        assert_eq!(correct, 200);
    }
}
