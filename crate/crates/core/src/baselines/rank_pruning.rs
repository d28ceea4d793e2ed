use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, Heatmap, PatchGrid};
use crate::mil::MilModel;
use crate::postproc::threshold_heatmap;
use crate::rng;

use super::classifier::{fit_classifier, ClassifierConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankPruningConfig {
    pub folds: usize,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl Default for RankPruningConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            classifier: ClassifierConfig::default(),
            seed: 0,
        }
    }
}

/// Threshold for the mask emitted directly by [`rank_pruning_refine`].
pub const RANK_PRUNING_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankPruningOutcome {
    /// Scores of the refitted classifier for every tissue cell.
    pub heatmap: Heatmap,
    /// `heatmap > 0.5`.
    pub mask: AnnotationMask,
    /// Out-of-fold scores, per cell (absent outside tissue).
    pub oof_scores: Vec<Option<f64>>,
    /// Fold holding each tissue cell out.
    pub fold_of: Vec<Option<usize>>,
    /// Mean out-of-fold score of noisily positive / negative cells.
    pub mean_pos: f64,
    pub mean_neg: f64,
    /// Pruned cells, sorted.
    pub pruned: Vec<usize>,
    pub pruned_negatives: usize,
    pub pruned_positives: usize,
}

/// Rank Pruning adapted to a single slide:
///
/// 1. k-fold out-of-fold scores from classifiers fitted on the noisy labels;
/// 2. confident counts against the class means `μ1` (noisy positives) and
///    `μ0` (noisy negatives): negatives scoring `>= μ1` estimate the false
///    negatives, positives scoring `<= μ0` the false positives;
/// 3. prune that many highest-scoring negatives and lowest-scoring positives,
///    refit on the rest and score every tissue cell.
pub fn rank_pruning_refine(
    grid: &PatchGrid,
    coarse: &AnnotationMask,
    cfg: &RankPruningConfig,
) -> Result<RankPruningOutcome> {
    if cfg.folds < 2 {
        return Err(Error::invalid("rank pruning needs at least 2 folds"));
    }
    cfg.classifier.validate()?;
    coarse
        .grid
        .ensure_same_shape(grid.tissue(), "coarse annotation vs grid")?;
    let cells = grid.tissue_indices();
    let labels: Vec<bool> = cells.iter().map(|&i| coarse.is_positive(i)).collect();
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::DegenerateAnnotation(
            "rank pruning needs both noisy classes present".into(),
        ));
    }
    if cells.len() < cfg.folds {
        return Err(Error::invalid("fewer tissue cells than folds"));
    }

    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, 50));
    let mut fold_slot = vec![0usize; cells.len()];
    for (rank, &slot) in order.iter().enumerate() {
        fold_slot[slot] = rank % cfg.folds;
    }

    let fold_scores: Vec<Vec<(usize, f64)>> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<(usize, f64)>> {
            let (train_x, train_y): (Vec<&[f64]>, Vec<bool>) = (0..cells.len())
                .filter(|&s| fold_slot[s] != f)
                .map(|s| (grid.feature(cells[s]), labels[s]))
                .unzip();
            let model = fit_classifier(
                &train_x,
                &train_y,
                &cfg.classifier,
                rng::derive_seed(cfg.seed, f as u64),
            )?;
            Ok((0..cells.len())
                .filter(|&s| fold_slot[s] == f)
                .map(|s| (s, model.instance_score(grid.feature(cells[s]))))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut oof = vec![0.0; cells.len()];
    for (s, v) in fold_scores.into_iter().flatten() {
        oof[s] = v;
    }

    let mean_of = |want: bool| {
        let (sum, n) = (0..cells.len())
            .filter(|&s| labels[s] == want)
            .fold((0.0, 0usize), |(a, n), s| (a + oof[s], n + 1));
        sum / n as f64
    };
    let mean_pos = mean_of(true);
    let mean_neg = mean_of(false);
    let est_fn = (0..cells.len())
        .filter(|&s| !labels[s] && oof[s] >= mean_pos)
        .count();
    let est_fp = (0..cells.len())
        .filter(|&s| labels[s] && oof[s] <= mean_neg)
        .count();

    // Least trustworthy first: highest-scoring negatives, lowest-scoring positives.
    let mut negs: Vec<usize> = (0..cells.len()).filter(|&s| !labels[s]).collect();
    negs.sort_by(|&a, &b| oof[b].total_cmp(&oof[a]).then(cells[a].cmp(&cells[b])));
    let mut poss: Vec<usize> = (0..cells.len()).filter(|&s| labels[s]).collect();
    poss.sort_by(|&a, &b| oof[a].total_cmp(&oof[b]).then(cells[a].cmp(&cells[b])));
    let mut pruned_slot = vec![false; cells.len()];
    for &s in negs.iter().take(est_fn).chain(poss.iter().take(est_fp)) {
        pruned_slot[s] = true;
    }
    let kept_pos = (0..cells.len())
        .filter(|&s| labels[s] && !pruned_slot[s])
        .count();
    let kept_neg = (0..cells.len())
        .filter(|&s| !labels[s] && !pruned_slot[s])
        .count();
    if kept_pos == 0 || kept_neg == 0 {
        return Err(Error::DegenerateAnnotation(
            "rank pruning removed every cell of one class".into(),
        ));
    }

    let (train_x, train_y): (Vec<&[f64]>, Vec<bool>) = (0..cells.len())
        .filter(|&s| !pruned_slot[s])
        .map(|s| (grid.feature(cells[s]), labels[s]))
        .unzip();
    let model = fit_classifier(
        &train_x,
        &train_y,
        &cfg.classifier,
        rng::derive_seed(cfg.seed, 1_000),
    )?;

    let n = grid.num_cells();
    let mut scores = vec![None; n];
    let mut oof_scores = vec![None; n];
    let mut fold_of = vec![None; n];
    for (s, &cell) in cells.iter().enumerate() {
        scores[cell] = Some(model.instance_score(grid.feature(cell)));
        oof_scores[cell] = Some(oof[s]);
        fold_of[cell] = Some(fold_slot[s]);
    }
    let heatmap = Heatmap::new(grid.width(), grid.height(), scores)?;
    let mask = threshold_heatmap(&heatmap, RANK_PRUNING_THRESHOLD);
    let mut pruned: Vec<usize> = (0..cells.len())
        .filter(|&s| pruned_slot[s])
        .map(|s| cells[s])
        .collect();
    pruned.sort_unstable();
    Ok(RankPruningOutcome {
        heatmap,
        mask,
        oof_scores,
        fold_of,
        mean_pos,
        mean_neg,
        pruned,
        pruned_negatives: est_fn,
        pruned_positives: est_fp,
    })
}
