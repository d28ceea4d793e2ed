use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, BinaryGrid, MaskRole, PatchGrid};
use crate::mil::MiNet;

use super::classifier::{fit_classifier, ClassifierConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    RawFeatures,
    /// Last hidden layer of an instance classifier fitted on the noisy labels.
    TrainedPenultimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DkNNConfig {
    pub k: usize,
    pub embedding: Embedding,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl Default for DkNNConfig {
    fn default() -> Self {
        Self {
            k: 10,
            embedding: Embedding::TrainedPenultimate,
            classifier: ClassifierConfig {
                epochs: 1,
                ..ClassifierConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    dist: f64,
    id: usize,
    slot: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
            .then(self.slot.cmp(&other.slot))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority vote of each point's `k` nearest neighbours (itself excluded).
/// Distance ties go to the smaller id; vote ties keep the point's own label.
pub fn knn_vote(
    points: &[Vec<f64>],
    ids: &[usize],
    labels: &[bool],
    k: usize,
) -> Result<Vec<bool>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if points.len() < k + 1 {
        return Err(Error::invalid(format!(
            "kNN with k = {k} needs at least {} points, got {}",
            k + 1,
            points.len()
        )));
    }
    Ok((0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
            for j in 0..points.len() {
                if j == i {
                    continue;
                }
                let c = Candidate {
                    dist: sq_dist(&points[i], &points[j]),
                    id: ids[j],
                    slot: j,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(c);
                }
            }
            let pos = heap.iter().filter(|c| labels[c.slot]).count();
            let neg = k - pos;
            match pos.cmp(&neg) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => labels[i],
            }
        })
        .collect())
}

/// Relabels every tissue cell by a kNN vote over the noisy labels in the
/// chosen embedding space. Non-tissue cells are negative.
pub fn dknn_refine(
    grid: &PatchGrid,
    coarse: &AnnotationMask,
    cfg: &DkNNConfig,
) -> Result<AnnotationMask> {
    coarse
        .grid
        .ensure_same_shape(grid.tissue(), "coarse annotation vs grid")?;
    let cells = grid.tissue_indices();
    if cells.len() < cfg.k + 1 {
        return Err(Error::invalid(format!(
            "DkNN with k = {} needs at least {} tissue cells, got {}",
            cfg.k,
            cfg.k + 1,
            cells.len()
        )));
    }
    let labels: Vec<bool> = cells.iter().map(|&i| coarse.is_positive(i)).collect();
    let points: Vec<Vec<f64>> = match cfg.embedding {
        Embedding::RawFeatures => cells.iter().map(|&i| grid.feature(i).to_vec()).collect(),
        Embedding::TrainedPenultimate => {
            let inputs: Vec<&[f64]> = cells.iter().map(|&i| grid.feature(i)).collect();
            let model: MiNet = fit_classifier(&inputs, &labels, &cfg.classifier, cfg.seed)?;
            inputs.iter().map(|x| model.penultimate(x)).collect()
        }
    };
    let votes = knn_vote(&points, &cells, &labels, cfg.k)?;
    let mut out = BinaryGrid::new(grid.width(), grid.height());
    for (&cell, &v) in cells.iter().zip(&votes) {
        out.cells_mut()[cell] = v;
    }
    Ok(AnnotationMask::new(out, MaskRole::Refined))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unanimous_neighbours_flip_label() {
        let pts = vec![vec![0.0], vec![0.1], vec![0.2], vec![-0.1], vec![10.0]];
        let labels = vec![false, true, true, true, false];
        let ids: Vec<usize> = (0..5).collect();
        let out = knn_vote(&pts, &ids, &labels, 3).unwrap();
        assert!(out[0]);
    }

    #[test]
    fn agreeing_neighbours_keep_label() {
        let pts = vec![vec![0.0], vec![0.1], vec![0.2], vec![0.3]];
        let labels = vec![true; 4];
        let ids: Vec<usize> = (0..4).collect();
        assert_eq!(knn_vote(&pts, &ids, &labels, 3).unwrap(), vec![true; 4]);
    }

    #[test]
    fn vote_tie_keeps_original() {
        let pts = vec![vec![0.0], vec![1.0], vec![-1.0]];
        let ids: Vec<usize> = (0..3).collect();
        let out = knn_vote(&pts, &ids, &[false, true, false], 2).unwrap();
        assert!(!out[0]);
        let out = knn_vote(&pts, &ids, &[true, true, false], 2).unwrap();
        assert!(out[0]);
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(knn_vote(&pts, &[0, 1], &[true, false], 2).is_err());
    }
}
