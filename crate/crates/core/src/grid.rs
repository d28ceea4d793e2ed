//! Lattice types shared by every stage: patch features, binary masks,
//! annotation masks and score heatmaps.
//!
//! All grids are stored row-major; cell `(x, y)` lives at index `y * width + x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major binary lattice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryGrid {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            cells: vec![value; width * height],
        }
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "binary grid cells",
                expected: width * height,
                actual: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                cells.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            cells,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        let i = self.index(x, y);
        self.cells[i] = value;
    }

    #[inline]
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn cells_mut(&mut self) -> &mut [bool] {
        &mut self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn same_shape(&self, other: &BinaryGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn ensure_same_shape(&self, other: &BinaryGrid, what: &'static str) -> Result<()> {
        if self.width != other.width {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.width,
                actual: other.width,
            });
        }
        if self.height != other.height {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.height,
                actual: other.height,
            });
        }
        Ok(())
    }

    pub fn and(&self, other: &BinaryGrid) -> BinaryGrid {
        debug_assert!(self.same_shape(other));
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(&a, &b)| a && b)
            .collect();
        BinaryGrid {
            width: self.width,
            height: self.height,
            cells,
        }
    }

    pub fn not(&self) -> BinaryGrid {
        BinaryGrid {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().map(|&c| !c).collect(),
        }
    }

    /// Indices of set cells in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
    }

    /// 4-neighbours of `index` that lie inside the lattice.
    pub fn neighbors4(&self, index: usize) -> impl Iterator<Item = usize> {
        let (x, y) = (index % self.width, index / self.width);
        let (w, h) = (self.width, self.height);
        let mut out = [usize::MAX; 4];
        if x > 0 {
            out[0] = index - 1;
        }
        if x + 1 < w {
            out[1] = index + 1;
        }
        if y > 0 {
            out[2] = index - w;
        }
        if y + 1 < h {
            out[3] = index + w;
        }
        out.into_iter().filter(|&i| i != usize::MAX)
    }
}

/// A slide as a lattice of patch feature vectors plus a tissue mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    width: usize,
    height: usize,
    feature_dim: usize,
    features: Vec<f64>,
    tissue: BinaryGrid,
    pub patch_px: u32,
    pub overlap_frac: f64,
}

pub const DEFAULT_PATCH_PX: u32 = 256;

impl PatchGrid {
    /// `features` is the flat row-major buffer, `feature_dim` values per cell.
    pub fn new(
        width: usize,
        height: usize,
        feature_dim: usize,
        features: Vec<f64>,
        tissue: BinaryGrid,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be at least 1"));
        }
        if features.len() != width * height * feature_dim {
            return Err(Error::DimensionMismatch {
                what: "patch features",
                expected: width * height * feature_dim,
                actual: features.len(),
            });
        }
        if tissue.width() != width || tissue.height() != height {
            return Err(Error::DimensionMismatch {
                what: "tissue mask cells",
                expected: width * height,
                actual: tissue.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature value in cell {}",
                pos / feature_dim
            )));
        }
        Ok(Self {
            width,
            height,
            feature_dim,
            features,
            tissue,
            patch_px: DEFAULT_PATCH_PX,
            overlap_frac: 0.0,
        })
    }

    pub fn with_geometry(mut self, patch_px: u32, overlap_frac: f64) -> Result<Self> {
        if patch_px == 0 {
            return Err(Error::invalid("patch_px must be positive"));
        }
        if !(0.0..1.0).contains(&overlap_frac) {
            return Err(Error::invalid(format!(
                "overlap_frac {overlap_frac} outside [0, 1)"
            )));
        }
        self.patch_px = patch_px;
        self.overlap_frac = overlap_frac;
        Ok(self)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn feature(&self, index: usize) -> &[f64] {
        &self.features[index * self.feature_dim..(index + 1) * self.feature_dim]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn tissue(&self) -> &BinaryGrid {
        &self.tissue
    }

    pub fn tissue_indices(&self) -> Vec<usize> {
        self.tissue.ones().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRole {
    GroundTruth,
    Coarse,
    Refined,
}

/// Binary annotation over the patch lattice (true = positive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationMask {
    pub grid: BinaryGrid,
    pub role: MaskRole,
}

impl AnnotationMask {
    pub fn new(grid: BinaryGrid, role: MaskRole) -> Self {
        Self { grid, role }
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn is_positive(&self, index: usize) -> bool {
        self.grid.cells()[index]
    }

    pub fn with_role(mut self, role: MaskRole) -> Self {
        self.role = role;
        self
    }

    /// Tissue cells labeled positive (`S_P`), row-major.
    pub fn positive_set(&self, tissue: &BinaryGrid) -> Vec<usize> {
        tissue.ones().filter(|&i| self.grid.cells()[i]).collect()
    }

    /// Tissue cells labeled negative (`S_N`), row-major.
    pub fn negative_set(&self, tissue: &BinaryGrid) -> Vec<usize> {
        tissue.ones().filter(|&i| !self.grid.cells()[i]).collect()
    }

    /// Checks shape agreement and that every positive cell is tissue.
    pub fn validate_against(&self, tissue: &BinaryGrid) -> Result<()> {
        self.grid
            .ensure_same_shape(tissue, "annotation vs tissue")?;
        if let Some(i) = self.grid.ones().find(|&i| !tissue.cells()[i]) {
            let (x, y) = self.grid.coords(i);
            return Err(Error::invalid(format!(
                "positive annotation cell ({x}, {y}) lies outside tissue"
            )));
        }
        Ok(())
    }
}

/// Per-cell risk scores in `[0, 1]`; non-tissue cells are absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    width: usize,
    height: usize,
    scores: Vec<Option<f64>>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, scores: Vec<Option<f64>>) -> Result<Self> {
        if scores.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "heatmap cells",
                expected: width * height,
                actual: scores.len(),
            });
        }
        if let Some(s) = scores.iter().flatten().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::invalid(format!("heatmap score {s} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            scores,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn score(&self, index: usize) -> Option<f64> {
        self.scores[index]
    }

    pub fn scores(&self) -> &[Option<f64>] {
        &self.scores
    }

    /// `(col, row, score)` for present cells in row-major order.
    pub fn present(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.scores
            .iter()
            .enumerate()
            .filter_map(move |(i, s)| s.map(|v| (i % self.width, i / self.width, v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_respect_borders() {
        let g = BinaryGrid::new(3, 2);
        let mut n: Vec<_> = g.neighbors4(0).collect();
        n.sort();
        assert_eq!(n, vec![1, 3]);
        let mut n: Vec<_> = g.neighbors4(4).collect();
        n.sort();
        assert_eq!(n, vec![1, 3, 5]);
    }

    #[test]
    fn patch_grid_rejects_bad_shapes() {
        let tissue = BinaryGrid::filled(2, 2, true);
        assert!(PatchGrid::new(2, 2, 3, vec![0.0; 11], tissue.clone()).is_err());
        assert!(PatchGrid::new(2, 2, 3, vec![f64::NAN; 12], tissue.clone()).is_err());
        let g = PatchGrid::new(2, 2, 3, vec![0.5; 12], tissue).unwrap();
        assert!(g.clone().with_geometry(256, 1.0).is_err());
        assert!(g.with_geometry(256, 0.75).is_ok());
    }

    #[test]
    fn annotation_sets_split_tissue() {
        let tissue = BinaryGrid::from_cells(2, 2, vec![true, true, true, false]).unwrap();
        let ann = AnnotationMask::new(
            BinaryGrid::from_cells(2, 2, vec![true, false, false, false]).unwrap(),
            MaskRole::Coarse,
        );
        assert_eq!(ann.positive_set(&tissue), vec![0]);
        assert_eq!(ann.negative_set(&tissue), vec![1, 2]);
        assert!(ann.validate_against(&tissue).is_ok());

        let outside = AnnotationMask::new(
            BinaryGrid::from_cells(2, 2, vec![false, false, false, true]).unwrap(),
            MaskRole::Coarse,
        );
        assert!(outside.validate_against(&tissue).is_err());
    }

    #[test]
    fn heatmap_rejects_out_of_range() {
        assert!(Heatmap::new(1, 2, vec![Some(0.2), Some(1.2)]).is_err());
        let h = Heatmap::new(2, 1, vec![None, Some(0.7)]).unwrap();
        assert_eq!(h.present().collect::<Vec<_>>(), vec![(1, 0, 0.7)]);
    }
}
