//! Refinement of coarse region annotations on patch lattices.
//!
//! A slide is a grid of patch feature vectors with a tissue mask. Coarse
//! annotations induce noisy per-patch labels; a multiple-instance learner is
//! trained on bags sampled from the two noisy classes, every patch is then
//! scored as a singleton bag, and the resulting heatmap is thresholded and
//! cleaned into a refined annotation. Two comparison cleaners (deep kNN label
//! editing and Rank Pruning), synthetic slides with controllable annotation
//! noise, evaluation metrics and file formats complete the pipeline.

pub mod baselines;
pub mod error;
pub mod grid;
pub mod hull;
pub mod io;
pub mod metrics;
pub mod mil;
pub mod morphology;
pub mod pipeline;
pub mod postproc;
pub mod rng;
pub mod synthgrid;

pub use error::{Error, Result};
pub use grid::{AnnotationMask, BinaryGrid, Heatmap, MaskRole, PatchGrid};
pub use metrics::{Aggregate, MetricsReport};
pub use mil::{MilModel, MilPredictor, ModelKind, TrainConfig};
pub use postproc::PostprocConfig;
pub use synthgrid::{NoiseSpec, NoiseVariant, SynthSpec};
