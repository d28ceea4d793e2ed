use crate::error::Result;

use super::dataset::MilBag;
use super::loss::{focal_loss_with_gamma, select_gamma};
use super::train::TrainConfig;

/// How the focusing parameter is chosen for one loss evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Gamma<'a> {
    /// Picked from the schedule using the forward-pass probability.
    Schedule(&'a TrainConfig),
    Fixed(f64),
}

impl Gamma<'_> {
    pub fn resolve(&self, prob: f64, label: bool) -> f64 {
        match *self {
            Gamma::Schedule(cfg) => select_gamma(prob, label, cfg),
            Gamma::Fixed(g) => g,
        }
    }
}

/// Loss, forward probability and per-block parameter gradients of one bag.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub loss: f64,
    pub prob: f64,
    pub gamma: f64,
    /// Aligned with [`MilModel::param_blocks`].
    pub grads: Vec<Vec<f64>>,
}

/// A bag-level predictor trainable with the focal loss.
pub trait MilModel {
    fn input_dim(&self) -> usize;

    /// Bag probability `P_j`.
    fn bag_probability(&self, bag: &MilBag) -> Result<f64>;

    /// Focal loss of `bag` against `label` with exact gradients for every
    /// parameter block; `gamma` is held constant within the evaluation.
    fn loss_and_grad(&self, bag: &MilBag, label: bool, gamma: Gamma<'_>) -> Result<LossGrad>;

    /// Score of `x` as a singleton bag.
    fn instance_score(&self, x: &[f64]) -> f64;

    fn param_blocks(&self) -> Vec<&[f64]>;

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    /// Loss only, for finite-difference checks.
    fn loss(&self, bag: &MilBag, label: bool, gamma: f64) -> Result<f64> {
        let p = self.bag_probability(bag)?;
        Ok(focal_loss_with_gamma(p, label, gamma).0)
    }
}
