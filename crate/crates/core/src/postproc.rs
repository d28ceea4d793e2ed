//! Heatmap to refined annotation: Otsu threshold on the scores of coarsely
//! positive cells, strict binarization, then hole filling and small-object
//! removal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, Heatmap, MaskRole};
use crate::morphology::{fill_small_holes, remove_small_objects};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostprocConfig {
    pub bins: usize,
    pub min_hole_px: usize,
    pub min_object_px: usize,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            bins: 256,
            min_hole_px: 100,
            min_object_px: 100,
        }
    }
}

impl PostprocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::invalid("postproc bins must be at least 2"));
        }
        Ok(())
    }
}

/// Otsu split of a histogram: the boundary `k` (class 0 = bins `< k`) that
/// maximises between-class variance, lowest `k` on ties. `None` when all mass
/// sits in one bin.
pub fn otsu_split(hist: &[u64]) -> Option<usize> {
    let total: u64 = hist.iter().sum();
    let weighted_total: f64 = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| b as f64 * c as f64)
        .sum();
    let mut n0 = 0u64;
    let mut s0 = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for k in 1..hist.len() {
        n0 += hist[k - 1];
        s0 += (k - 1) as f64 * hist[k - 1] as f64;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let (w0, w1) = (n0 as f64, n1 as f64);
        let diff = s0 / w0 - (weighted_total - s0) / w1;
        let var = w0 * w1 * diff * diff;
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((k, var));
        }
    }
    best.map(|(k, _)| k)
}

/// Equal-width bin of a score in `[0, 1]`.
#[inline]
pub fn score_bin(value: f64, bins: usize) -> usize {
    ((value * bins as f64).floor() as usize).min(bins - 1)
}

/// Otsu threshold of scores in `[0, 1]` over `bins` equal-width bins; the
/// returned value is a bin boundary `k / bins`.
pub fn otsu_threshold(values: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid("otsu needs at least 2 bins"));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("otsu input {v} outside [0, 1]")));
    }
    let mut hist = vec![0u64; bins];
    for &v in values {
        hist[score_bin(v, bins)] += 1;
    }
    otsu_split(&hist)
        .map(|k| k as f64 / bins as f64)
        .ok_or(Error::DegenerateHistogram {
            count: values.len(),
        })
}

/// Threshold applied by [`binarize`] when Otsu is degenerate.
pub const FALLBACK_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binarized {
    pub mask: AnnotationMask,
    pub threshold: f64,
    /// True when Otsu was degenerate and [`FALLBACK_THRESHOLD`] was used.
    pub fallback: bool,
}

/// Positive iff score `> v0`, where `v0` is Otsu over the scores of cells
/// positive in `coarse`. Absent cells are negative.
pub fn binarize(map: &Heatmap, coarse: &AnnotationMask, cfg: &PostprocConfig) -> Result<Binarized> {
    cfg.validate()?;
    if map.width() != coarse.width() || map.height() != coarse.height() {
        return Err(Error::DimensionMismatch {
            what: "heatmap vs coarse annotation",
            expected: coarse.width() * coarse.height(),
            actual: map.width() * map.height(),
        });
    }
    let positive_scores: Vec<f64> = map
        .scores()
        .iter()
        .enumerate()
        .filter(|(i, _)| coarse.is_positive(*i))
        .filter_map(|(_, s)| *s)
        .collect();
    if positive_scores.is_empty() {
        return Err(Error::DegenerateAnnotation(
            "no coarsely positive cell carries a score".into(),
        ));
    }
    let (threshold, fallback) = match otsu_threshold(&positive_scores, cfg.bins) {
        Ok(v0) => (v0, false),
        Err(Error::DegenerateHistogram { .. }) => (FALLBACK_THRESHOLD, true),
        Err(e) => return Err(e),
    };
    Ok(Binarized {
        mask: threshold_heatmap(map, threshold),
        threshold,
        fallback,
    })
}

pub fn threshold_heatmap(map: &Heatmap, threshold: f64) -> AnnotationMask {
    let cells = map
        .scores()
        .iter()
        .map(|s| s.is_some_and(|v| v > threshold))
        .collect();
    let grid = crate::grid::BinaryGrid::from_cells(map.width(), map.height(), cells)
        .expect("heatmap shape is consistent");
    AnnotationMask::new(grid, MaskRole::Refined)
}

/// Fills enclosed holes below `min_hole_px`, then removes objects below
/// `min_object_px`. Idempotent.
pub fn morphology_clean(mask: &AnnotationMask, cfg: &PostprocConfig) -> AnnotationMask {
    let filled = fill_small_holes(&mask.grid, cfg.min_hole_px);
    let cleaned = remove_small_objects(&filled, cfg.min_object_px);
    AnnotationMask::new(cleaned, MaskRole::Refined)
}
