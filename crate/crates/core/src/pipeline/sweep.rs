use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{mean_std, report};
use crate::mil::{multi_slide_train, MilPredictor};
use crate::rng;
use crate::synthgrid::SynthSpec;

use super::config::RunConfig;
use super::corpus::{synthesize_slide, NoiseChoice, Slide};
use super::refine::{model_init_seed, refine, refine_with_model};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    BagSize,
    BagCount,
    KSlides,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::BagSize => "bag_size",
            SweepAxis::BagCount => "bag_count",
            SweepAxis::KSlides => "k_slides",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "bag_size" => Ok(SweepAxis::BagSize),
            "bag_count" | "num_bags" => Ok(SweepAxis::BagCount),
            "k_slides" => Ok(SweepAxis::KSlides),
            _ => Err(Error::invalid(format!("unknown sweep axis `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub repeats: usize,
    /// Slides refined per repeat (bag axes only).
    pub slides_per_repeat: usize,
    /// Held-out evaluation slides per repeat (`k_slides` only).
    pub held_out: usize,
    pub run: RunConfig,
    pub synth: SynthSpec,
    pub noise: NoiseChoice,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::BagSize,
            values: vec![1, 3, 5, 10, 20],
            repeats: 5,
            slides_per_repeat: 1,
            held_out: 4,
            run: RunConfig::default(),
            synth: SynthSpec::default(),
            noise: NoiseChoice::S1 {
                rho0: 0.2,
                rho1: 0.2,
            },
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 || self.values.contains(&0) {
            return Err(Error::invalid("a sweep needs at least two positive values"));
        }
        if self.repeats == 0 || self.slides_per_repeat == 0 || self.held_out == 0 {
            return Err(Error::invalid(
                "repeats, slides_per_repeat and held_out must be positive",
            ));
        }
        if self.run.method.model_kind().is_none() {
            return Err(Error::invalid(format!(
                "sweeps train MIL models; method `{}` is not one",
                self.run.method
            )));
        }
        self.run.validate()?;
        self.synth.validate()
    }

    fn repeat_seed(&self, r: usize) -> u64 {
        rng::derive_seed(self.seed, r as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    /// Refined F1 per repeat, one entry per evaluated slide.
    pub trials: Vec<Vec<f64>>,
    pub f1_mean: f64,
    pub f1_std: f64,
}

impl SweepPoint {
    fn new(value: usize, trials: Vec<Vec<f64>>) -> Self {
        let flat: Vec<f64> = trials.iter().flatten().copied().collect();
        let ms = mean_std(&flat).expect("at least one trial");
        Self {
            value,
            trials,
            f1_mean: ms.mean,
            f1_std: ms.std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn point(&self, value: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.value == value)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},repeat,slide,f1\n", self.axis);
        for p in &self.points {
            for (r, trial) in p.trials.iter().enumerate() {
                for (i, f1) in trial.iter().enumerate() {
                    s.push_str(&format!("{},{r},{i},{f1:.6}\n", p.value));
                }
            }
        }
        s
    }
}

fn slides_for_repeat(cfg: &SweepConfig, r: usize, count: usize) -> Result<Vec<Slide>> {
    (0..count)
        .map(|i| synthesize_slide(&cfg.synth, &cfg.noise, cfg.repeat_seed(r), i))
        .collect()
}

fn refined_f1(slide: &Slide, run: &RunConfig) -> Result<f64> {
    let out = refine(&slide.grid, &slide.coarse, Some(&slide.ground_truth), run)?;
    Ok(out.refined_metrics.expect("ground truth supplied").f1)
}

/// Runs every `(value, repeat)` trial in parallel. Repeat `r` uses the same
/// slides for every value, so points are paired.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let kind = cfg.run.method.model_kind().expect("validated");
    let pool_size = match cfg.axis {
        SweepAxis::KSlides => cfg.values.iter().max().copied().unwrap_or(1) + cfg.held_out,
        _ => cfg.slides_per_repeat,
    };
    let pools: Vec<Vec<Slide>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| slides_for_repeat(cfg, r, pool_size))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.values.len())
        .flat_map(|v| (0..cfg.repeats).map(move |r| (v, r)))
        .collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(v, r)| -> Result<Vec<f64>> {
            let value = cfg.values[v];
            let mut run = cfg.run.clone();
            run.seed = cfg.run.seed.wrapping_add(r as u64);
            let run = run.seeded();
            let pool = &pools[r];
            match cfg.axis {
                SweepAxis::BagSize => run_with(&run, |t| t.train.bag_size = value, pool),
                SweepAxis::BagCount => run_with(&run, |t| t.train.num_bags = value, pool),
                SweepAxis::KSlides => {
                    let max_k = pool.len() - cfg.held_out;
                    let train_slides: Vec<_> =
                        pool[..max_k].iter().map(|s| (&s.grid, &s.coarse)).collect();
                    let mut model =
                        MilPredictor::new(kind, cfg.synth.feature_dim, model_init_seed(run.seed))?;
                    multi_slide_train(&mut model, &train_slides, &run.train, value)?;
                    pool[max_k..]
                        .iter()
                        .map(|s| {
                            let (_, refined) =
                                refine_with_model(&model, &s.grid, &s.coarse, &run.post)?;
                            Ok(report(&refined, &s.ground_truth, s.grid.tissue())?.f1)
                        })
                        .collect()
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut per_value: Vec<Vec<Vec<f64>>> = vec![Vec::new(); cfg.values.len()];
    for (&(v, _), trial) in jobs.iter().zip(results) {
        per_value[v].push(trial);
    }
    Ok(SweepReport {
        axis: cfg.axis,
        points: cfg
            .values
            .iter()
            .zip(per_value)
            .map(|(&value, trials)| SweepPoint::new(value, trials))
            .collect(),
    })
}

fn run_with(base: &RunConfig, tweak: impl Fn(&mut RunConfig), pool: &[Slide]) -> Result<Vec<f64>> {
    let mut run = base.clone();
    tweak(&mut run);
    pool.iter().map(|s| refined_f1(s, &run)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parses() {
        assert_eq!("k-slides".parse::<SweepAxis>().unwrap(), SweepAxis::KSlides);
        assert!("depth".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn rejects_baseline_method() {
        let mut cfg = SweepConfig::default();
        cfg.run.method = super::super::config::Method::Dknn;
        assert!(cfg.validate().is_err());
    }
}
