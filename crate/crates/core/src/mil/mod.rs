//! Multiple instance learning: bag construction, the attention-pooled and
//! mean-pooled predictors, focal-loss training and singleton inference.

mod adam;
mod attention;
pub mod checkpoint;
mod dataset;
mod infer;
mod loss;
mod minet;
mod model;
mod nn;
mod predictor;
mod train;

pub use adam::Adam;
pub use attention::{softmax, AttentionCache, AttentionDims, AttentionForward, AttentionMil};
pub use dataset::{build_mil_dataset, build_mil_dataset_for_slide, CellRef, MilBag, MilDataset};
pub use infer::infer_singletons;
pub use loss::{clamp_prob, focal_loss, focal_loss_with_gamma, select_gamma, FocalLoss, PROB_EPS};
pub use minet::MiNet;
pub use model::{Gamma, LossGrad, MilModel};
pub use nn::{dot, glorot_bound, logistic, Dense, Mlp, MlpGrad, MlpTrace};
pub use predictor::{MilPredictor, ModelKind};
pub use train::{
    multi_slide_train, train, LossTrace, TraceRow, TrainConfig, COMPOUND_MORPHOLOGY_BAG_SIZE,
};
