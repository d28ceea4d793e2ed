use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Heatmap, PatchGrid};

use super::model::MilModel;

/// Scores every tissue cell as a singleton bag; non-tissue cells are absent.
/// Cells are independent, so the work is spread across threads.
pub fn infer_singletons<M: MilModel + Sync>(model: &M, grid: &PatchGrid) -> Result<Heatmap> {
    if model.input_dim() != grid.feature_dim() {
        return Err(Error::DimensionMismatch {
            what: "model input vs grid features",
            expected: model.input_dim(),
            actual: grid.feature_dim(),
        });
    }
    let tissue = grid.tissue().cells();
    let scores: Vec<Option<f64>> = (0..grid.num_cells())
        .into_par_iter()
        .map(|i| tissue[i].then(|| model.instance_score(grid.feature(i))))
        .collect();
    Heatmap::new(grid.width(), grid.height(), scores)
}
