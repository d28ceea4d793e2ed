use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, BinaryGrid, MaskRole};

/// Placement of square patches over a pixel canvas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeGeometry {
    pub patch_px: usize,
    pub stride: f64,
    pub cols: usize,
    pub rows: usize,
}

impl LatticeGeometry {
    /// Lattice of patches fully contained in a `px_width` x `px_height` canvas.
    pub fn new(
        px_width: usize,
        px_height: usize,
        patch_px: usize,
        overlap_frac: f64,
    ) -> Result<Self> {
        if patch_px == 0 {
            return Err(Error::invalid("patch_px must be positive"));
        }
        if !(0.0..1.0).contains(&overlap_frac) {
            return Err(Error::invalid(format!(
                "overlap_frac {overlap_frac} outside [0, 1)"
            )));
        }
        let stride = patch_px as f64 * (1.0 - overlap_frac);
        if stride < 1.0 {
            return Err(Error::invalid(format!(
                "patch stride {stride} is below one pixel"
            )));
        }
        let count = |extent: usize| {
            if extent < patch_px {
                0
            } else {
                ((extent - patch_px) as f64 / stride).floor() as usize + 1
            }
        };
        Ok(Self {
            patch_px,
            stride,
            cols: count(px_width),
            rows: count(px_height),
        })
    }

    /// Top-left pixel of patch `(col, row)`.
    pub fn origin(&self, col: usize, row: usize) -> (usize, usize) {
        (
            (col as f64 * self.stride).floor() as usize,
            (row as f64 * self.stride).floor() as usize,
        )
    }

    /// Pixel sampled to label patch `(col, row)`.
    pub fn center(&self, col: usize, row: usize) -> (usize, usize) {
        let (ox, oy) = self.origin(col, row);
        (ox + self.patch_px / 2, oy + self.patch_px / 2)
    }
}

/// Labels each lattice patch by the pixel under its center.
pub fn assign_patch_labels(
    pixels: &BinaryGrid,
    patch_px: usize,
    overlap_frac: f64,
    role: MaskRole,
) -> Result<AnnotationMask> {
    if pixels.is_empty() {
        return Err(Error::invalid("annotation pixel mask is empty"));
    }
    let geo = LatticeGeometry::new(pixels.width(), pixels.height(), patch_px, overlap_frac)?;
    if geo.cols == 0 || geo.rows == 0 {
        return Err(Error::invalid(format!(
            "{}x{} pixel mask is smaller than one {patch_px}px patch",
            pixels.width(),
            pixels.height()
        )));
    }
    let grid = BinaryGrid::from_fn(geo.cols, geo.rows, |c, r| {
        let (px, py) = geo.center(c, r);
        pixels.get(px, py)
    });
    Ok(AnnotationMask::new(grid, role))
}

/// Paints a lattice mask back onto a pixel canvas: each patch fills the
/// stride-sized block around its center pixel. Inverse of
/// [`assign_patch_labels`] at the same geometry.
pub fn rasterize_lattice(
    mask: &AnnotationMask,
    px_width: usize,
    px_height: usize,
    patch_px: usize,
    overlap_frac: f64,
) -> Result<BinaryGrid> {
    let geo = LatticeGeometry::new(px_width, px_height, patch_px, overlap_frac)?;
    if geo.cols != mask.width() || geo.rows != mask.height() {
        return Err(Error::DimensionMismatch {
            what: "lattice columns",
            expected: geo.cols,
            actual: mask.width(),
        });
    }
    let step = geo.stride.floor() as usize;
    let half = step / 2;
    let mut out = BinaryGrid::new(px_width, px_height);
    for r in 0..geo.rows {
        for c in 0..geo.cols {
            if !mask.grid.get(c, r) {
                continue;
            }
            let (cx, cy) = geo.center(c, r);
            let (x0, y0) = (cx.saturating_sub(half), cy.saturating_sub(half));
            for y in y0..(y0 + step).min(px_height) {
                for x in x0..(x0 + step).min(px_width) {
                    out.set(x, y, true);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_pixels_give_all_positive_lattice() {
        let px = BinaryGrid::filled(512, 512, true);
        let m = assign_patch_labels(&px, 256, 0.0, MaskRole::Coarse).unwrap();
        assert_eq!(m.grid.count(), m.grid.len());
    }

    #[test]
    fn lattice_sizes_follow_stride() {
        let px = BinaryGrid::new(512, 512);
        let m = assign_patch_labels(&px, 256, 0.0, MaskRole::Coarse).unwrap();
        assert_eq!((m.width(), m.height()), (2, 2));
        let geo = LatticeGeometry::new(512, 512, 256, 0.75).unwrap();
        assert_eq!(geo.stride, 64.0);
        let m = assign_patch_labels(&px, 256, 0.75, MaskRole::Coarse).unwrap();
        assert_eq!((m.width(), m.height()), (5, 5));
        // Last patch is fully contained.
        let (ox, _) = geo.origin(4, 0);
        assert_eq!(ox + 256, 512);
    }

    #[test]
    fn center_pixel_decides_label() {
        // 40% of the single patch is positive (left columns), center is not.
        let px = BinaryGrid::from_fn(10, 10, |x, _| x < 4);
        let m = assign_patch_labels(&px, 10, 0.0, MaskRole::Coarse).unwrap();
        assert!(!m.grid.get(0, 0));
        let px = BinaryGrid::from_fn(10, 10, |x, y| x == 5 && y == 5);
        let m = assign_patch_labels(&px, 10, 0.0, MaskRole::Coarse).unwrap();
        assert!(m.grid.get(0, 0));
    }

    #[test]
    fn sub_pixel_stride_rejected() {
        let px = BinaryGrid::new(8, 8);
        assert!(assign_patch_labels(&px, 2, 0.75, MaskRole::Coarse).is_err());
        assert!(assign_patch_labels(&px, 0, 0.0, MaskRole::Coarse).is_err());
        assert!(assign_patch_labels(&px, 16, 0.0, MaskRole::Coarse).is_err());
    }
}
