//! Comparison cleaners: deep k-nearest-neighbour label editing and Rank
//! Pruning, both working from the noisy per-cell labels alone.

mod classifier;
mod dknn;
mod rank_pruning;

pub use classifier::{fit_classifier, ClassifierConfig};
pub use dknn::{dknn_refine, knn_vote, DkNNConfig, Embedding};
pub use rank_pruning::{
    rank_pruning_refine, RankPruningConfig, RankPruningOutcome, RANK_PRUNING_THRESHOLD,
};
