use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, PatchGrid};

use super::adam::Adam;
use super::dataset::{build_mil_dataset_for_slide, MilDataset};
use super::model::{Gamma, MilModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub num_bags: usize,
    pub bag_size: usize,
    pub lr0: f64,
    /// The learning rate halves every this many bags.
    pub lr_halving_period: usize,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub gamma_break: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_bags: 1000,
            bag_size: 10,
            lr0: 5e-5,
            lr_halving_period: 100,
            gamma_lo: 5.0,
            gamma_hi: 3.0,
            gamma_break: 0.2,
            seed: 0,
        }
    }
}

/// Bag size for tissues with compound morphology.
pub const COMPOUND_MORPHOLOGY_BAG_SIZE: usize = 3;

impl TrainConfig {
    pub fn compound_morphology() -> Self {
        Self {
            bag_size: COMPOUND_MORPHOLOGY_BAG_SIZE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bags < 2 {
            return Err(Error::invalid("num_bags must be at least 2"));
        }
        if self.bag_size == 0 {
            return Err(Error::invalid("bag_size must be at least 1"));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::invalid("lr0 must be positive"));
        }
        if self.lr_halving_period == 0 {
            return Err(Error::invalid("lr_halving_period must be positive"));
        }
        if !(self.gamma_break > 0.0 && self.gamma_break < 1.0) {
            return Err(Error::invalid("gamma_break must lie in (0, 1)"));
        }
        if !(self.gamma_lo >= 0.0 && self.gamma_hi >= 0.0) {
            return Err(Error::invalid("gamma values must be non-negative"));
        }
        Ok(())
    }

    /// `lr0 · 0.5^⌊t / period⌋` at bag index `t`.
    pub fn learning_rate(&self, t: usize) -> f64 {
        let halvings = (t / self.lr_halving_period).min(1074) as i32;
        self.lr0 * 0.5f64.powi(halvings)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,loss,lr")?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.step, r.loss, r.lr)?;
        }
        Ok(())
    }
}

/// One Adam step per bag, in dataset order.
pub fn train<M: MilModel>(
    model: &mut M,
    dataset: &MilDataset,
    cfg: &TrainConfig,
) -> Result<LossTrace> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("cannot train on an empty MIL dataset"));
    }
    let sizes: Vec<usize> = model.param_blocks().iter().map(|b| b.len()).collect();
    let mut adam = Adam::new(&sizes);
    let mut trace = LossTrace {
        rows: Vec::with_capacity(dataset.len()),
    };
    for (t, bag) in dataset.bags.iter().enumerate() {
        let lg = model.loss_and_grad(bag, bag.label, Gamma::Schedule(cfg))?;
        if !lg.loss.is_finite() || lg.grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step: t });
        }
        let lr = cfg.learning_rate(t);
        adam.step(&mut model.param_blocks_mut(), &lg.grads, lr);
        trace.rows.push(TraceRow {
            step: t,
            loss: lg.loss,
            lr,
        });
    }
    Ok(trace)
}

/// Builds one MIL dataset per slide (slide `i` sampled with seed
/// `cfg.seed + i`), concatenates them, shuffles the union with `cfg.seed`
/// when more than one slide contributes, and trains a single model.
pub fn multi_slide_train<M: MilModel>(
    model: &mut M,
    slides: &[(&PatchGrid, &AnnotationMask)],
    cfg: &TrainConfig,
    k_slides: usize,
) -> Result<(MilDataset, LossTrace)> {
    if k_slides == 0 {
        return Err(Error::invalid("k_slides must be at least 1"));
    }
    if slides.len() < k_slides {
        return Err(Error::invalid(format!(
            "k_slides = {k_slides} but only {} slides supplied",
            slides.len()
        )));
    }
    let mut combined = MilDataset::default();
    for (i, (grid, coarse)) in slides.iter().take(k_slides).enumerate() {
        let ds = build_mil_dataset_for_slide(
            grid,
            coarse,
            cfg,
            cfg.seed.wrapping_add(i as u64),
            &format!("slide-{i}"),
        )?;
        combined.extend(ds);
    }
    if k_slides > 1 {
        combined.shuffle(cfg.seed);
    }
    let trace = train(model, &combined, cfg)?;
    Ok((combined, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_rate_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate(0), 5e-5);
        assert_eq!(cfg.learning_rate(99), 5e-5);
        assert_eq!(cfg.learning_rate(100), 2.5e-5);
        assert_eq!(cfg.learning_rate(250), 1.25e-5);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            gamma_break: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            num_bags: 1,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(TrainConfig::compound_morphology().bag_size, 3);
    }

    #[test]
    fn trace_csv_header() {
        let trace = LossTrace {
            rows: vec![TraceRow {
                step: 0,
                loss: 0.5,
                lr: 5e-5,
            }],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "step,loss,lr\n0,0.5,0.00005\n"
        );
    }
}
