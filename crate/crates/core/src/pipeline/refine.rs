use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{dknn_refine, rank_pruning_refine};
use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, Heatmap, PatchGrid};
use crate::metrics::{report, MetricsReport};
use crate::mil::{
    build_mil_dataset, infer_singletons, multi_slide_train, train, LossTrace, MilPredictor,
};
use crate::postproc::{binarize, morphology_clean, PostprocConfig};
use crate::rng;

use super::config::{Method, RunConfig};

/// Wall-clock seconds per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub train: f64,
    pub infer: f64,
    pub postproc: f64,
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    pub method: Method,
    /// Absent for DkNN, whose output is already binary.
    pub heatmap: Option<Heatmap>,
    pub refined: AnnotationMask,
    pub threshold: Option<f64>,
    pub threshold_fallback: bool,
    pub coarse_metrics: Option<MetricsReport>,
    pub refined_metrics: Option<MetricsReport>,
    pub timings: Timings,
    pub loss_trace: Option<LossTrace>,
    pub model: Option<MilPredictor>,
}

/// Seed stream used to initialise MIL models inside a run.
pub fn model_init_seed(run_seed: u64) -> u64 {
    rng::derive_seed(run_seed, 0x1417)
}

/// Heatmap → Otsu binarization on coarse positives → morphology.
pub fn postprocess_heatmap(
    map: &Heatmap,
    coarse: &AnnotationMask,
    post: &PostprocConfig,
) -> Result<(AnnotationMask, f64, bool)> {
    let b = binarize(map, coarse, post)?;
    Ok((morphology_clean(&b.mask, post), b.threshold, b.fallback))
}

/// Runs the configured cleaner on one slide. With `gt`, coarse and refined
/// annotations are scored against it.
pub fn refine(
    grid: &PatchGrid,
    coarse: &AnnotationMask,
    gt: Option<&AnnotationMask>,
    cfg: &RunConfig,
) -> Result<RefineResult> {
    let cfg = cfg.clone().seeded();
    cfg.validate()?;
    coarse
        .grid
        .ensure_same_shape(grid.tissue(), "coarse annotation vs grid")?;
    let n_pos = coarse.positive_set(grid.tissue()).len();
    let n_tissue = grid.tissue().count();
    if n_pos == 0 || n_pos == n_tissue {
        return Err(Error::DegenerateAnnotation(format!(
            "coarse annotation has {n_pos} positive and {} negative tissue cells; both classes \
             are required (use multi-slide mode so other slides supply the missing class)",
            n_tissue - n_pos
        )));
    }
    let mut timings = Timings::default();
    let mut loss_trace = None;
    let mut model = None;

    let (heatmap, refined, threshold, fallback) = match cfg.method {
        Method::LcMilAtten | Method::LcMilMinet => {
            let kind = cfg.method.model_kind().expect("MIL method");
            let t0 = Instant::now();
            let dataset = build_mil_dataset(grid, coarse, &cfg.train)?;
            let mut m = MilPredictor::new(kind, grid.feature_dim(), model_init_seed(cfg.seed))?;
            loss_trace = Some(train(&mut m, &dataset, &cfg.train)?);
            timings.train = t0.elapsed().as_secs_f64();

            let t1 = Instant::now();
            let map = infer_singletons(&m, grid)?;
            timings.infer = t1.elapsed().as_secs_f64();
            model = Some(m);

            let t2 = Instant::now();
            let (refined, v0, fb) = postprocess_heatmap(&map, coarse, &cfg.post)?;
            timings.postproc = t2.elapsed().as_secs_f64();
            (Some(map), refined, Some(v0), fb)
        }
        Method::RankPruning => {
            let t0 = Instant::now();
            let outcome = rank_pruning_refine(grid, coarse, &cfg.rp)?;
            timings.train = t0.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let (refined, v0, fb) = postprocess_heatmap(&outcome.heatmap, coarse, &cfg.post)?;
            timings.postproc = t2.elapsed().as_secs_f64();
            (Some(outcome.heatmap), refined, Some(v0), fb)
        }
        Method::Dknn => {
            let t0 = Instant::now();
            let mask = dknn_refine(grid, coarse, &cfg.dknn)?;
            timings.train = t0.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let refined = morphology_clean(&mask, &cfg.post);
            timings.postproc = t2.elapsed().as_secs_f64();
            (None, refined, None, false)
        }
    };

    let (coarse_metrics, refined_metrics) = match gt {
        Some(gt) => (
            Some(report(coarse, gt, grid.tissue())?),
            Some(report(&refined, gt, grid.tissue())?),
        ),
        None => (None, None),
    };
    Ok(RefineResult {
        method: cfg.method,
        heatmap,
        refined,
        threshold,
        threshold_fallback: fallback,
        coarse_metrics,
        refined_metrics,
        timings,
        loss_trace,
        model,
    })
}

/// Applies a trained MIL model to a held-out slide.
pub fn refine_with_model(
    model: &MilPredictor,
    grid: &PatchGrid,
    coarse: &AnnotationMask,
    post: &PostprocConfig,
) -> Result<(Heatmap, AnnotationMask)> {
    if grid.feature_dim() != crate::mil::MilModel::input_dim(model) {
        return Err(Error::DimensionMismatch {
            what: "model input vs grid features",
            expected: crate::mil::MilModel::input_dim(model),
            actual: grid.feature_dim(),
        });
    }
    let map = infer_singletons(model, grid)?;
    let (refined, _, _) = postprocess_heatmap(&map, coarse, post)?;
    Ok((map, refined))
}

/// Multi-slide mode: trains one MIL model on bags pooled from `train_slides`,
/// then refines the target slide with it. Every training slide needs both
/// classes; the target's annotation only feeds the Otsu threshold, so it
/// needs positives but may lack negatives.
pub fn refine_multi(
    train_slides: &[(&PatchGrid, &AnnotationMask)],
    grid: &PatchGrid,
    coarse: &AnnotationMask,
    gt: Option<&AnnotationMask>,
    cfg: &RunConfig,
) -> Result<RefineResult> {
    let cfg = cfg.clone().seeded();
    cfg.validate()?;
    let kind = cfg.method.model_kind().ok_or_else(|| {
        Error::invalid(format!(
            "multi-slide training needs a MIL method, got `{}`",
            cfg.method
        ))
    })?;
    if train_slides.is_empty() {
        return Err(Error::invalid(
            "multi-slide mode needs at least one training slide",
        ));
    }
    coarse
        .grid
        .ensure_same_shape(grid.tissue(), "coarse annotation vs grid")?;
    let mut timings = Timings::default();
    let t0 = Instant::now();
    let mut model = MilPredictor::new(kind, grid.feature_dim(), model_init_seed(cfg.seed))?;
    let (_, trace) = multi_slide_train(&mut model, train_slides, &cfg.train, train_slides.len())?;
    timings.train = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let map = infer_singletons(&model, grid)?;
    timings.infer = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let (refined, v0, fb) = postprocess_heatmap(&map, coarse, &cfg.post)?;
    timings.postproc = t2.elapsed().as_secs_f64();

    let (coarse_metrics, refined_metrics) = match gt {
        Some(gt) => (
            Some(report(coarse, gt, grid.tissue())?),
            Some(report(&refined, gt, grid.tissue())?),
        ),
        None => (None, None),
    };
    Ok(RefineResult {
        method: cfg.method,
        heatmap: Some(map),
        refined,
        threshold: Some(v0),
        threshold_fallback: fb,
        coarse_metrics,
        refined_metrics,
        timings,
        loss_trace: Some(trace),
        model: Some(model),
    })
}
