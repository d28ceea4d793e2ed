//! Synthetic slides, patch labeling from pixel annotations, tissue detection
//! and the two coarse-annotation noise generators.

mod labels;
mod noise;
mod synth;
mod tissue;

pub use labels::{assign_patch_labels, rasterize_lattice, LatticeGeometry};
pub use noise::{
    apply_noise_s1, apply_noise_s2, flip_count, s1_flip_sets, NoiseSpec, NoiseVariant,
    DEFAULT_DILATION_RADIUS,
};
pub use synth::{
    class_direction, generate_synthetic_slide, SynthSpec, MAX_LESION_RATIO, MIN_LESION_RATIO,
};
pub use tissue::{
    rgb_to_hs, tissue_mask_hsv_otsu, tissue_mask_rgb, RgbImage, DEFAULT_RGB_THRESHOLDS,
};

use crate::error::{Error, Result};
use crate::grid::BinaryGrid;

/// Fraction of tissue cells that are positive.
pub fn lesion_ratio(mask: &BinaryGrid, tissue: &BinaryGrid) -> Result<f64> {
    mask.ensure_same_shape(tissue, "mask vs tissue")?;
    let n_tissue = tissue.count();
    if n_tissue == 0 {
        return Err(Error::invalid("lesion ratio undefined for empty tissue"));
    }
    let pos = mask.and(tissue).count();
    Ok(pos as f64 / n_tissue as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lesion_ratio_cases() {
        let tissue = BinaryGrid::from_fn(10, 12, |_, y| y < 10);
        assert_eq!(lesion_ratio(&tissue, &tissue).unwrap(), 1.0);
        assert_eq!(
            lesion_ratio(&BinaryGrid::new(10, 12), &tissue).unwrap(),
            0.0
        );
        let mask = BinaryGrid::from_fn(10, 12, |x, y| y * 10 + x < 43 || y >= 10);
        assert!((lesion_ratio(&mask, &tissue).unwrap() - 0.43).abs() < 1e-15);
        assert!(lesion_ratio(&mask, &BinaryGrid::new(10, 12)).is_err());
    }
}
