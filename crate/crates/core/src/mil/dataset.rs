use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, PatchGrid};
use crate::rng;

use super::train::TrainConfig;

/// Where a bag instance came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRef {
    pub slide: usize,
    pub cell: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilBag {
    pub instances: Vec<Vec<f64>>,
    pub label: bool,
    pub sources: Vec<CellRef>,
}

impl MilBag {
    pub fn new(instances: Vec<Vec<f64>>, label: bool) -> Result<Self> {
        let sources = vec![
            CellRef {
                slide: usize::MAX,
                cell: usize::MAX,
            };
            instances.len()
        ];
        let bag = Self {
            instances,
            label,
            sources,
        };
        bag.validate()?;
        Ok(bag)
    }

    pub fn singleton(x: &[f64]) -> Self {
        Self {
            instances: vec![x.to_vec()],
            label: false,
            sources: vec![CellRef {
                slide: usize::MAX,
                cell: usize::MAX,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::invalid("a bag needs at least one instance"));
        }
        let d = self.dim();
        if let Some(x) = self.instances.iter().find(|x| x.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "bag instance",
                expected: d,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::invalid("a bag needs at least one instance"));
        }
        for x in &self.instances {
            if x.len() != expected {
                return Err(Error::DimensionMismatch {
                    what: "bag instance",
                    expected,
                    actual: x.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MilDataset {
    pub bags: Vec<MilBag>,
    /// Identifier of each contributing slide, indexed by `CellRef::slide`.
    pub provenance: Vec<String>,
}

impl MilDataset {
    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.bags.iter().filter(|b| b.label).count()
    }

    /// Appends `other`, renumbering its slide indices.
    pub fn extend(&mut self, other: MilDataset) {
        let offset = self.provenance.len();
        self.provenance.extend(other.provenance);
        self.bags.extend(other.bags.into_iter().map(|mut b| {
            for s in &mut b.sources {
                s.slide += offset;
            }
            b
        }));
    }

    pub fn shuffle(&mut self, seed: u64) {
        let mut r = rng::stream(seed, 21);
        self.bags.shuffle(&mut r);
    }
}

/// Samples `cfg.num_bags` bags of `cfg.bag_size` instances with replacement:
/// positive bags from coarsely positive tissue cells, negative bags from
/// coarsely negative ones. Bags alternate positive/negative, starting with a
/// positive bag.
pub fn build_mil_dataset(
    grid: &PatchGrid,
    coarse: &AnnotationMask,
    cfg: &TrainConfig,
) -> Result<MilDataset> {
    build_mil_dataset_for_slide(grid, coarse, cfg, cfg.seed, "slide-0")
}

pub fn build_mil_dataset_for_slide(
    grid: &PatchGrid,
    coarse: &AnnotationMask,
    cfg: &TrainConfig,
    seed: u64,
    slide_id: &str,
) -> Result<MilDataset> {
    cfg.validate()?;
    coarse
        .grid
        .ensure_same_shape(grid.tissue(), "coarse annotation vs grid")?;
    let pos = coarse.positive_set(grid.tissue());
    let neg = coarse.negative_set(grid.tissue());
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateAnnotation(format!(
            "{slide_id}: {} positive and {} negative tissue cells; both classes are required \
             (use multi-slide mode so other slides supply the missing class)",
            pos.len(),
            neg.len()
        )));
    }
    let mut r = rng::stream(seed, 20);
    let mut bags = Vec::with_capacity(cfg.num_bags);
    for j in 0..cfg.num_bags {
        let label = j % 2 == 0;
        let pool = if label { &pos } else { &neg };
        let mut instances = Vec::with_capacity(cfg.bag_size);
        let mut sources = Vec::with_capacity(cfg.bag_size);
        for _ in 0..cfg.bag_size {
            let cell = pool[r.random_range(0..pool.len())];
            instances.push(grid.feature(cell).to_vec());
            sources.push(CellRef { slide: 0, cell });
        }
        bags.push(MilBag {
            instances,
            label,
            sources,
        });
    }
    Ok(MilDataset {
        bags,
        provenance: vec![slide_id.to_string()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BinaryGrid, MaskRole};

    fn toy() -> (PatchGrid, AnnotationMask) {
        let tissue = BinaryGrid::filled(4, 4, true);
        let feats: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let grid = PatchGrid::new(4, 4, 1, feats, tissue).unwrap();
        let coarse = AnnotationMask::new(
            BinaryGrid::from_fn(4, 4, |x, y| x == 0 && y == 0),
            MaskRole::Coarse,
        );
        (grid, coarse)
    }

    #[test]
    fn defaults_give_balanced_interleaved_bags() {
        let (grid, coarse) = toy();
        let ds = build_mil_dataset(&grid, &coarse, &TrainConfig::default()).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.positives(), 500);
        assert!(ds
            .bags
            .iter()
            .enumerate()
            .all(|(j, b)| b.label == (j % 2 == 0)));
        assert!(ds.bags.iter().all(|b| b.len() == 10));
    }

    #[test]
    fn single_positive_cell_repeats() {
        let (grid, coarse) = toy();
        let ds = build_mil_dataset(&grid, &coarse, &TrainConfig::default()).unwrap();
        for b in ds.bags.iter().filter(|b| b.label) {
            assert!(b.instances.iter().all(|x| x == &vec![0.0]));
        }
    }

    #[test]
    fn odd_bag_count_rounds_positives_up() {
        let (grid, coarse) = toy();
        let cfg = TrainConfig {
            num_bags: 7,
            ..TrainConfig::default()
        };
        let ds = build_mil_dataset(&grid, &coarse, &cfg).unwrap();
        assert_eq!(ds.positives(), 4);
    }

    #[test]
    fn missing_class_is_degenerate() {
        let (grid, _) = toy();
        let empty = AnnotationMask::new(BinaryGrid::new(4, 4), MaskRole::Coarse);
        assert!(matches!(
            build_mil_dataset(&grid, &empty, &TrainConfig::default()),
            Err(Error::DegenerateAnnotation(_))
        ));
    }

    #[test]
    fn extend_renumbers_slides() {
        let (grid, coarse) = toy();
        let cfg = TrainConfig {
            num_bags: 4,
            ..TrainConfig::default()
        };
        let mut a = build_mil_dataset(&grid, &coarse, &cfg).unwrap();
        let b = build_mil_dataset_for_slide(&grid, &coarse, &cfg, 9, "other").unwrap();
        a.extend(b);
        assert_eq!(a.len(), 8);
        assert_eq!(
            a.provenance,
            vec!["slide-0".to_string(), "other".to_string()]
        );
        assert!(a.bags[4..]
            .iter()
            .all(|b| b.sources.iter().all(|s| s.slide == 1)));
    }
}
