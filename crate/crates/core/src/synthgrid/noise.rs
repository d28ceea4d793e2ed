use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, BinaryGrid, MaskRole};
use crate::hull::rasterize_hull;
use crate::morphology::{component_mask, dilate_disc, largest_component};
use crate::rng;

pub const DEFAULT_DILATION_RADIUS: usize = 3;

/// Coarse-annotation noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseVariant {
    /// Uniform label flipping: `rho0` of true negatives and `rho1` of true
    /// positives (tissue cells only).
    S1 { rho0: f64, rho1: f64 },
    /// Keep the largest lesion, dilate it and take its convex hull; or, with
    /// `cut_in_half`, keep only one half of the largest lesion.
    S2 {
        dilation_radius: usize,
        cut_in_half: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variant: NoiseVariant,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if let NoiseVariant::S1 { rho0, rho1 } = self.variant {
            for (name, v) in [("rho0", rho0), ("rho1", rho1)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, gt: &AnnotationMask, tissue: &BinaryGrid) -> Result<AnnotationMask> {
        self.validate()?;
        match self.variant {
            NoiseVariant::S1 { rho0, rho1 } => apply_noise_s1(gt, tissue, rho0, rho1, self.seed),
            NoiseVariant::S2 {
                dilation_radius,
                cut_in_half,
            } => apply_noise_s2(gt, tissue, dilation_radius, cut_in_half),
        }
    }
}

/// Number of cells S-I flips out of `n` at rate `rho`.
pub fn flip_count(n: usize, rho: f64) -> usize {
    ((rho * n as f64).round() as usize).min(n)
}

/// Tissue cells S-I would flip, as (former positives, former negatives).
pub fn s1_flip_sets(
    gt: &AnnotationMask,
    tissue: &BinaryGrid,
    rho0: f64,
    rho1: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let pos = gt.positive_set(tissue);
    let neg = gt.negative_set(tissue);
    let mut r = rng::stream(seed, 10);
    let mut pick = |set: &[usize], rho: f64| -> Vec<usize> {
        let k = flip_count(set.len(), rho);
        let mut chosen: Vec<usize> = index::sample(&mut r, set.len(), k)
            .into_iter()
            .map(|j| set[j])
            .collect();
        chosen.sort_unstable();
        chosen
    };
    let flipped_pos = pick(&pos, rho1);
    let flipped_neg = pick(&neg, rho0);
    (flipped_pos, flipped_neg)
}

/// Flips exactly `round(rho1·|S_P|)` positive and `round(rho0·|S_N|)`
/// negative tissue cells, chosen uniformly without replacement.
pub fn apply_noise_s1(
    gt: &AnnotationMask,
    tissue: &BinaryGrid,
    rho0: f64,
    rho1: f64,
    seed: u64,
) -> Result<AnnotationMask> {
    if gt.role != MaskRole::GroundTruth {
        return Err(Error::invalid("S-I noise expects a ground-truth mask"));
    }
    for (name, v) in [("rho0", rho0), ("rho1", rho1)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
        }
    }
    gt.grid
        .ensure_same_shape(tissue, "ground truth vs tissue")?;
    let (fp, fn_) = s1_flip_sets(gt, tissue, rho0, rho1, seed);
    let mut out = gt.grid.clone();
    for i in fp.into_iter().chain(fn_) {
        out.cells_mut()[i] = !out.cells()[i];
    }
    Ok(AnnotationMask::new(out, MaskRole::Coarse))
}

/// Omit-small-lesions noise. See [`NoiseVariant::S2`].
pub fn apply_noise_s2(
    gt: &AnnotationMask,
    tissue: &BinaryGrid,
    dilation_radius: usize,
    cut_in_half: bool,
) -> Result<AnnotationMask> {
    gt.grid
        .ensure_same_shape(tissue, "ground truth vs tissue")?;
    let (w, h) = (gt.width(), gt.height());
    let largest = largest_component(&gt.grid)
        .ok_or_else(|| Error::invalid("S-II noise needs at least one positive cell"))?;
    let kept = component_mask(w, h, &largest);

    let out = if cut_in_half {
        let cx = largest.cells.iter().map(|&i| (i % w) as f64).sum::<f64>() / largest.area() as f64;
        // Drop the half to the right of the centroid's vertical axis.
        BinaryGrid::from_fn(w, h, |x, y| kept.get(x, y) && (x as f64) <= cx)
    } else {
        let dilated = dilate_disc(&kept, dilation_radius);
        rasterize_hull(&dilated)
    };
    Ok(AnnotationMask::new(out.and(tissue), MaskRole::Coarse))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt_from(rows: &[&str]) -> AnnotationMask {
        let h = rows.len();
        let w = rows[0].len();
        AnnotationMask::new(
            BinaryGrid::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'#'),
            MaskRole::GroundTruth,
        )
    }

    #[test]
    fn zero_rates_are_identity() {
        let gt = gt_from(&["##..", "##..", "...."]);
        let tissue = BinaryGrid::filled(4, 3, true);
        let out = apply_noise_s1(&gt, &tissue, 0.0, 0.0, 5).unwrap();
        assert_eq!(out.grid, gt.grid);
        assert_eq!(out.role, MaskRole::Coarse);
    }

    #[test]
    fn full_positive_rate_clears_positives() {
        let gt = gt_from(&["##..", "##..", "...."]);
        let tissue = BinaryGrid::filled(4, 3, true);
        let out = apply_noise_s1(&gt, &tissue, 0.0, 1.0, 5).unwrap();
        assert_eq!(out.grid.count(), 0);
    }

    #[test]
    fn exact_flip_counts() {
        // 10x10 all tissue, 40 positives.
        let gt = AnnotationMask::new(
            BinaryGrid::from_fn(10, 10, |x, _| x < 4),
            MaskRole::GroundTruth,
        );
        let tissue = BinaryGrid::filled(10, 10, true);
        let out = apply_noise_s1(&gt, &tissue, 0.1, 0.25, 99).unwrap();
        let flipped_pos = (0..100)
            .filter(|&i| gt.grid.cells()[i] && !out.grid.cells()[i])
            .count();
        let flipped_neg = (0..100)
            .filter(|&i| !gt.grid.cells()[i] && out.grid.cells()[i])
            .count();
        assert_eq!((flipped_pos, flipped_neg), (10, 6));
    }

    #[test]
    fn non_tissue_cells_untouched() {
        let gt = AnnotationMask::new(BinaryGrid::new(6, 6), MaskRole::GroundTruth);
        let tissue = BinaryGrid::from_fn(6, 6, |x, _| x < 3);
        let out = apply_noise_s1(&gt, &tissue, 1.0, 0.0, 1).unwrap();
        assert_eq!(out.grid, tissue);
    }

    #[test]
    fn s1_requires_ground_truth_role() {
        let gt = gt_from(&["#."]).with_role(MaskRole::Coarse);
        let tissue = BinaryGrid::filled(2, 1, true);
        assert!(apply_noise_s1(&gt, &tissue, 0.1, 0.1, 0).is_err());
    }

    #[test]
    fn s2_keeps_only_largest_component() {
        let gt = AnnotationMask::new(
            BinaryGrid::from_fn(20, 12, |x, y| {
                (x < 6 && y < 5) || (x >= 14 && y >= 8 && x < 18 && y < 11)
            }),
            MaskRole::GroundTruth,
        );
        let tissue = BinaryGrid::filled(20, 12, true);
        let out = apply_noise_s2(&gt, &tissue, 0, false).unwrap();
        assert_eq!(out.grid.count(), 30);
        assert_eq!(out.grid, BinaryGrid::from_fn(20, 12, |x, y| x < 6 && y < 5));
    }

    #[test]
    fn s2_hull_fills_l_shape() {
        let gt = gt_from(&["###", "..#", "..#"]);
        let tissue = BinaryGrid::filled(3, 3, true);
        let out = apply_noise_s2(&gt, &tissue, 0, false).unwrap();
        assert!(out.grid.get(1, 1));
        assert!(!out.grid.get(0, 1));
    }

    #[test]
    fn s2_cut_in_half_drops_right_half() {
        let gt = gt_from(&["......", ".####.", ".####.", "......"]);
        let tissue = BinaryGrid::filled(6, 4, true);
        let out = apply_noise_s2(&gt, &tissue, 3, true).unwrap();
        // centroid x = 2.5; columns 1 and 2 remain.
        assert_eq!(
            out.grid,
            gt_from(&["......", ".##...", ".##...", "......"]).grid
        );
    }

    #[test]
    fn s2_rejects_empty_truth() {
        let gt = AnnotationMask::new(BinaryGrid::new(3, 3), MaskRole::GroundTruth);
        let tissue = BinaryGrid::filled(3, 3, true);
        assert!(apply_noise_s2(&gt, &tissue, 3, false).is_err());
    }
}
