use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::attention::{AttentionDims, AttentionMil};
use super::dataset::MilBag;
use super::minet::MiNet;
use super::model::{Gamma, LossGrad, MilModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Attention,
    MiNet,
}

/// Either MIL predictor behind one type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MilPredictor {
    Attention(AttentionMil),
    MiNet(MiNet),
}

impl MilPredictor {
    /// Default architecture (`d -> 64 -> 32` extractor or classifier trunk).
    pub fn new(kind: ModelKind, input_dim: usize, seed: u64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Attention => {
                MilPredictor::Attention(AttentionMil::new(&AttentionDims::new(input_dim), seed)?)
            }
            ModelKind::MiNet => MilPredictor::MiNet(MiNet::with_default_hidden(input_dim, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            MilPredictor::Attention(_) => ModelKind::Attention,
            MilPredictor::MiNet(_) => ModelKind::MiNet,
        }
    }

    fn inner(&self) -> &dyn MilModel {
        match self {
            MilPredictor::Attention(m) => m,
            MilPredictor::MiNet(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn MilModel {
        match self {
            MilPredictor::Attention(m) => m,
            MilPredictor::MiNet(m) => m,
        }
    }
}

impl MilModel for MilPredictor {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }

    fn bag_probability(&self, bag: &MilBag) -> Result<f64> {
        self.inner().bag_probability(bag)
    }

    fn loss_and_grad(&self, bag: &MilBag, label: bool, gamma: Gamma<'_>) -> Result<LossGrad> {
        self.inner().loss_and_grad(bag, label, gamma)
    }

    fn instance_score(&self, x: &[f64]) -> f64 {
        self.inner().instance_score(x)
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        self.inner().param_blocks()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.inner_mut().param_blocks_mut()
    }
}
