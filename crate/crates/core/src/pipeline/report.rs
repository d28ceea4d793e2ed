use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, Aggregate, MetricsReport, METRIC_NAMES};

use super::config::{Method, RunConfig};
use super::refine::{RefineResult, Timings};

pub const RESULT_VERSION: u32 = 1;

/// Serialized summary of one refinement run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: u32,
    pub method: Method,
    pub seed: u64,
    pub config: RunConfig,
    pub threshold: Option<f64>,
    pub threshold_fallback: bool,
    pub refined_positive_cells: usize,
    pub coarse_metrics: Option<MetricsReport>,
    pub refined_metrics: Option<MetricsReport>,
    pub final_loss: Option<f64>,
    pub timings: Timings,
}

impl RunSummary {
    pub fn new(result: &RefineResult, cfg: &RunConfig) -> Self {
        let cfg = cfg.clone().seeded();
        Self {
            version: RESULT_VERSION,
            method: result.method,
            seed: cfg.seed,
            config: cfg,
            threshold: result.threshold,
            threshold_fallback: result.threshold_fallback,
            refined_positive_cells: result.refined.grid.count(),
            coarse_metrics: result.coarse_metrics.clone(),
            refined_metrics: result.refined_metrics.clone(),
            final_loss: result
                .loss_trace
                .as_ref()
                .and_then(|t| t.rows.last())
                .map(|r| r.loss),
            timings: result.timings,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Metrics of one slide in a batch evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub slide: String,
    pub coarse: Option<MetricsReport>,
    pub refined: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub rows: Vec<EvalRow>,
    pub refined: Aggregate,
    pub coarse: Option<Aggregate>,
}

impl EvalReport {
    pub fn new(rows: Vec<EvalRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("evaluation needs at least one slide"));
        }
        let refined: Vec<MetricsReport> = rows.iter().map(|r| r.refined.clone()).collect();
        let coarse: Option<Vec<MetricsReport>> = rows.iter().map(|r| r.coarse.clone()).collect();
        Ok(Self {
            version: RESULT_VERSION,
            refined: aggregate(&refined)?,
            coarse: coarse.map(|c| aggregate(&c)).transpose()?,
            rows,
        })
    }

    /// Rows ordered by ascending coarse F1 (rows without coarse metrics last),
    /// then by slide name.
    pub fn sorted_by_coarse_f1(&self) -> Vec<&EvalRow> {
        let mut out: Vec<&EvalRow> = self.rows.iter().collect();
        out.sort_by(|a, b| {
            let key = |r: &EvalRow| r.coarse.as_ref().map(|m| m.f1).unwrap_or(f64::INFINITY);
            key(a)
                .total_cmp(&key(b))
                .then_with(|| a.slide.cmp(&b.slide))
        });
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec![
            "slide".to_string(),
            "tp".into(),
            "fp".into(),
            "tn".into(),
            "fn".into(),
        ];
        header.extend(METRIC_NAMES.iter().map(|m| m.to_string()));
        header.extend(METRIC_NAMES.iter().map(|m| format!("coarse_{m}")));
        header.push("degenerate".into());
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let r = &row.refined;
            let mut cols = vec![
                row.slide.replace(',', "_"),
                r.tp.to_string(),
                r.fp.to_string(),
                r.tn.to_string(),
                r.fn_.to_string(),
            ];
            cols.extend(r.values().iter().map(|v| format!("{v:.6}")));
            match &row.coarse {
                Some(c) => cols.extend(c.values().iter().map(|v| format!("{v:.6}"))),
                None => cols.extend(std::iter::repeat_n(String::new(), METRIC_NAMES.len())),
            }
            cols.push(r.degenerate.join(";"));
            writeln!(out, "{}", cols.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
