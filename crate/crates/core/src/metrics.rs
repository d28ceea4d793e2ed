//! Tissue-restricted confusion counts and the derived per-slide metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, BinaryGrid};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(
    pred: &AnnotationMask,
    gt: &AnnotationMask,
    tissue: &BinaryGrid,
) -> Result<Confusion> {
    pred.grid
        .ensure_same_shape(&gt.grid, "prediction vs ground truth")?;
    pred.grid
        .ensure_same_shape(tissue, "prediction vs tissue")?;
    let mut c = Confusion::default();
    for i in tissue.ones() {
        match (pred.grid.cells()[i], gt.grid.cells()[i]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ppv: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub npv: f64,
    pub f1: f64,
    pub iou: f64,
    /// Names of metrics whose ratio was 0/0 and reported as 1.0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

pub const METRIC_NAMES: [&str; 6] = ["ppv", "tpr", "tnr", "npv", "f1", "iou"];

impl MetricsReport {
    pub fn from_confusion(c: Confusion) -> Self {
        let mut degenerate = Vec::new();
        let mut ratio = |name: &str, num: usize, den: usize| {
            if den == 0 {
                degenerate.push(name.to_string());
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        let ppv = ratio("ppv", c.tp, c.tp + c.fp);
        let tpr = ratio("tpr", c.tp, c.tp + c.fn_);
        let tnr = ratio("tnr", c.tn, c.tn + c.fp);
        let npv = ratio("npv", c.tn, c.tn + c.fn_);
        let f1 = ratio("f1", 2 * c.tp, 2 * c.tp + c.fp + c.fn_);
        let iou = ratio("iou", c.tp, c.tp + c.fp + c.fn_);
        Self {
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            ppv,
            tpr,
            tnr,
            npv,
            f1,
            iou,
            degenerate,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "ppv" => self.ppv,
            "tpr" => self.tpr,
            "tnr" => self.tnr,
            "npv" => self.npv,
            "f1" => self.f1,
            "iou" => self.iou,
            _ => return None,
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [self.ppv, self.tpr, self.tnr, self.npv, self.f1, self.iou]
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate.is_empty()
    }
}

pub fn report(
    pred: &AnnotationMask,
    gt: &AnnotationMask,
    tissue: &BinaryGrid,
) -> Result<MetricsReport> {
    Ok(MetricsReport::from_confusion(confusion(pred, gt, tissue)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (n - 1); a single value has std 0.
pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(MeanStd { mean, std })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub ppv: MeanStd,
    pub tpr: MeanStd,
    pub tnr: MeanStd,
    pub npv: MeanStd,
    pub f1: MeanStd,
    pub iou: MeanStd,
}

impl Aggregate {
    pub fn get(&self, name: &str) -> Option<MeanStd> {
        Some(match name {
            "ppv" => self.ppv,
            "tpr" => self.tpr,
            "tnr" => self.tnr,
            "npv" => self.npv,
            "f1" => self.f1,
            "iou" => self.iou,
            _ => return None,
        })
    }
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty report list"));
    }
    let column = |k: usize| {
        let vals: Vec<f64> = reports.iter().map(|r| r.values()[k]).collect();
        mean_std(&vals).expect("non-empty")
    };
    Ok(Aggregate {
        n: reports.len(),
        ppv: column(0),
        tpr: column(1),
        tnr: column(2),
        npv: column(3),
        f1: column(4),
        iou: column(5),
    })
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MaskRole;

    fn mask(cells: &[bool], w: usize) -> AnnotationMask {
        AnnotationMask::new(
            BinaryGrid::from_cells(w, cells.len() / w, cells.to_vec()).unwrap(),
            MaskRole::Refined,
        )
    }

    #[test]
    fn hand_formula_values() {
        let r = MetricsReport::from_confusion(Confusion {
            tp: 8,
            fp: 2,
            tn: 88,
            fn_: 2,
        });
        assert_eq!(r.ppv, 0.8);
        assert_eq!(r.tpr, 0.8);
        assert_eq!(r.f1, 0.8);
        assert!((r.iou - 8.0 / 12.0).abs() < 1e-15);
        assert!(!r.is_degenerate());
    }

    #[test]
    fn identical_masks_score_one() {
        let m = mask(&[true, false, true, true], 2);
        let tissue = BinaryGrid::filled(2, 2, true);
        let r = report(&m, &m, &tissue).unwrap();
        assert_eq!(r.values(), [1.0; 6]);
        assert_eq!((r.fp, r.fn_), (0, 0));
    }

    #[test]
    fn complement_has_no_agreement() {
        let m = mask(&[true, false, true, true], 2);
        let not = AnnotationMask::new(m.grid.not(), MaskRole::Refined);
        let c = confusion(&not, &m, &BinaryGrid::filled(2, 2, true)).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
    }

    #[test]
    fn empty_pred_and_truth_is_flagged_perfect() {
        let m = mask(&[false; 4], 2);
        let r = report(&m, &m, &BinaryGrid::filled(2, 2, true)).unwrap();
        assert_eq!(r.f1, 1.0);
        assert!(r.degenerate.iter().any(|d| d == "f1"));
    }

    #[test]
    fn counts_restricted_to_tissue() {
        let pred = mask(&[true, true, false, false], 2);
        let gt = mask(&[true, false, false, false], 2);
        let tissue = BinaryGrid::from_cells(2, 2, vec![true, false, true, false]).unwrap();
        let c = confusion(&pred, &gt, &tissue).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 0,
                tn: 1,
                fn_: 0
            }
        );
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let mut a = MetricsReport::from_confusion(Confusion {
            tp: 1,
            fp: 0,
            tn: 1,
            fn_: 0,
        });
        let mut b = a.clone();
        a.f1 = 0.8;
        b.f1 = 0.9;
        let agg = aggregate(&[a.clone(), b.clone()]).unwrap();
        assert!((agg.f1.mean - 0.85).abs() < 1e-12);
        assert!((agg.f1.std - 0.070_710_678_118_654_76).abs() < 1e-12);
        let rev = aggregate(&[b, a.clone()]).unwrap();
        assert_eq!(agg.f1, rev.f1);
        let single = aggregate(&[a]).unwrap();
        assert_eq!(
            single.f1,
            MeanStd {
                mean: 0.8,
                std: 0.0
            }
        );
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
