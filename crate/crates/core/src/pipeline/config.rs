use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{DkNNConfig, RankPruningConfig};
use crate::error::{Error, Result};
use crate::mil::{ModelKind, TrainConfig};
use crate::postproc::PostprocConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LcMilAtten,
    LcMilMinet,
    Dknn,
    RankPruning,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::LcMilAtten,
        Method::LcMilMinet,
        Method::Dknn,
        Method::RankPruning,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LcMilAtten => "lc_mil_atten",
            Method::LcMilMinet => "lc_mil_minet",
            Method::Dknn => "dknn",
            Method::RankPruning => "rank_pruning",
        }
    }

    pub fn model_kind(&self) -> Option<ModelKind> {
        match self {
            Method::LcMilAtten => Some(ModelKind::Attention),
            Method::LcMilMinet => Some(ModelKind::MiNet),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// Everything that determines a refinement run. Nested seeds are overwritten
/// by `seed` when the run starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub method: Method,
    pub train: TrainConfig,
    pub dknn: DkNNConfig,
    pub rp: RankPruningConfig,
    pub post: PostprocConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::LcMilAtten,
            train: TrainConfig::default(),
            dknn: DkNNConfig::default(),
            rp: RankPruningConfig::default(),
            post: PostprocConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            seed,
            ..Self::default()
        }
        .seeded()
    }

    /// Propagates `seed` into the nested configurations.
    pub fn seeded(mut self) -> Self {
        self.train.seed = self.seed;
        self.dknn.seed = self.seed;
        self.rp.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.post.validate()?;
        self.rp.classifier.validate()?;
        self.dknn.classifier.validate()?;
        if self.dknn.k == 0 {
            return Err(Error::invalid("dknn.k must be at least 1"));
        }
        if self.rp.folds < 2 {
            return Err(Error::invalid("rp.folds must be at least 2"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!(
            "lc-mil-atten".parse::<Method>().unwrap(),
            Method::LcMilAtten
        );
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"method":"dknn","train":{"bag_size":3}}"#).unwrap();
        assert_eq!(cfg.method, Method::Dknn);
        assert_eq!(cfg.train.bag_size, 3);
        assert_eq!(cfg.train.num_bags, 1000);
        assert_eq!(cfg.post.min_hole_px, 100);
    }

    #[test]
    fn seed_propagates() {
        let cfg = RunConfig::new(Method::RankPruning, 77);
        assert_eq!((cfg.train.seed, cfg.dknn.seed, cfg.rp.seed), (77, 77, 77));
    }
}
