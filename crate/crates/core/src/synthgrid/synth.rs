use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, BinaryGrid, MaskRole, PatchGrid};
use crate::morphology::count_components;
use crate::rng::{self, Rng};

use super::lesion_ratio;

/// Lesion-area ratio bounds (within tissue) a synthetic slide must satisfy.
pub const MIN_LESION_RATIO: f64 = 0.10;
pub const MAX_LESION_RATIO: f64 = 0.90;

const MAX_SLIDE_ATTEMPTS: usize = 64;
const MAX_BLOB_ATTEMPTS: usize = 200;

/// Parameters of a synthetic slide.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub feature_dim: usize,
    pub n_lesions: usize,
    /// Mean lesion radius in cells.
    pub lesion_scale: f64,
    /// Distance between the two class-conditional feature means.
    pub class_separation: f64,
    /// Within-class standard deviation per feature.
    pub feature_noise: f64,
    /// Per-slide perturbation of the class-mean direction, relative to its
    /// unit length. Zero makes every slide share one feature distribution.
    #[serde(default)]
    pub slide_jitter: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            feature_dim: 8,
            n_lesions: 3,
            lesion_scale: 8.0,
            class_separation: 3.0,
            feature_noise: 1.0,
            slide_jitter: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 4 || self.height < 4 {
            return Err(Error::invalid("synthetic lattice must be at least 4x4"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be at least 1"));
        }
        if self.n_lesions == 0 {
            return Err(Error::invalid("n_lesions must be at least 1"));
        }
        if !(self.lesion_scale.is_finite() && self.lesion_scale > 0.0) {
            return Err(Error::invalid("lesion_scale must be positive"));
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("feature_noise", self.feature_noise),
            ("slide_jitter", self.slide_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Generates a slide and its ground-truth annotation.
///
/// Tissue is a perturbed ellipse; lesions are smooth star-shaped blobs placed
/// fully inside tissue and separated by at least one cell so that each forms
/// its own 4-connected component. Features are isotropic Gaussians whose means
/// sit at `±class_separation / 2` along a unit direction.
pub fn generate_synthetic_slide(spec: &SynthSpec) -> Result<(PatchGrid, AnnotationMask)> {
    spec.validate()?;
    let mut geo = rng::stream(spec.seed, 1);
    let mut last_reason = String::new();
    for _ in 0..MAX_SLIDE_ATTEMPTS {
        let tissue = tissue_blob(spec.width, spec.height, &mut geo);
        let lesions = match place_lesions(spec, &tissue, &mut geo) {
            Some(l) => l,
            None => {
                last_reason = format!("could not place {} separated lesions", spec.n_lesions);
                continue;
            }
        };
        if count_components(&lesions) != spec.n_lesions {
            last_reason = "lesion blobs did not form the requested component count".into();
            continue;
        }
        let ratio = lesion_ratio(&lesions, &tissue)?;
        if !(MIN_LESION_RATIO..=MAX_LESION_RATIO).contains(&ratio) {
            last_reason = format!("lesion ratio {ratio:.3} outside [0.10, 0.90]");
            continue;
        }
        let grid = sample_features(spec, tissue, &lesions)?;
        return Ok((grid, AnnotationMask::new(lesions, MaskRole::GroundTruth)));
    }
    Err(Error::SynthesisFailed {
        attempts: MAX_SLIDE_ATTEMPTS,
        reason: last_reason,
    })
}

/// Unit direction separating the class means for a slide.
pub fn class_direction(feature_dim: usize, slide_jitter: f64, seed: u64) -> Vec<f64> {
    let base = 1.0 / (feature_dim as f64).sqrt();
    let mut dir = vec![base; feature_dim];
    if slide_jitter > 0.0 {
        let mut r = rng::stream(seed, 3);
        for v in dir.iter_mut() {
            let z: f64 = r.sample(StandardNormal);
            *v += slide_jitter * z * base;
        }
    }
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        dir.iter_mut().for_each(|v| *v /= norm);
    }
    dir
}

fn sample_features(
    spec: &SynthSpec,
    tissue: BinaryGrid,
    lesions: &BinaryGrid,
) -> Result<PatchGrid> {
    let d = spec.feature_dim;
    let dir = class_direction(d, spec.slide_jitter, spec.seed);
    let half = spec.class_separation / 2.0;
    let mut r = rng::stream(spec.seed, 2);
    let n = spec.width * spec.height;
    let mut features = Vec::with_capacity(n * d);
    for i in 0..n {
        let sign = if lesions.cells()[i] { 1.0 } else { -1.0 };
        for &u in &dir {
            let z: f64 = r.sample(StandardNormal);
            features.push(sign * half * u + spec.feature_noise * z);
        }
    }
    PatchGrid::new(spec.width, spec.height, d, features, tissue)
}

fn tissue_blob(width: usize, height: usize, r: &mut Rng) -> BinaryGrid {
    let cx = width as f64 / 2.0 - 0.5 + r.random_range(-0.03..0.03) * width as f64;
    let cy = height as f64 / 2.0 - 0.5 + r.random_range(-0.03..0.03) * height as f64;
    let ax = width as f64 * r.random_range(0.40..0.47);
    let ay = height as f64 * r.random_range(0.40..0.47);
    let harmonics = random_harmonics(r, 0.06);
    BinaryGrid::from_fn(width, height, |x, y| {
        let dx = (x as f64 - cx) / ax;
        let dy = (y as f64 - cy) / ay;
        let theta = dy.atan2(dx);
        (dx * dx + dy * dy).sqrt() <= radial_factor(&harmonics, theta)
    })
}

fn random_harmonics(r: &mut Rng, max_amp: f64) -> [(f64, f64); 3] {
    let mut h = [(0.0, 0.0); 3];
    for slot in h.iter_mut() {
        *slot = (r.random_range(0.0..max_amp), r.random_range(0.0..2.0 * PI));
    }
    h
}

fn radial_factor(harmonics: &[(f64, f64); 3], theta: f64) -> f64 {
    1.0 + harmonics
        .iter()
        .enumerate()
        .map(|(k, (amp, phase))| amp * ((k as f64 + 1.0) * theta - phase).cos())
        .sum::<f64>()
}

fn place_lesions(spec: &SynthSpec, tissue: &BinaryGrid, r: &mut Rng) -> Option<BinaryGrid> {
    let (w, h) = (spec.width, spec.height);
    let tissue_cells: Vec<usize> = tissue.ones().collect();
    if tissue_cells.is_empty() {
        return None;
    }
    let mut lesions = BinaryGrid::new(w, h);
    // Cells that a new blob may not occupy: existing lesions and their 4-neighbours.
    let mut blocked = BinaryGrid::new(w, h);
    for _ in 0..spec.n_lesions {
        let mut placed = false;
        for _ in 0..MAX_BLOB_ATTEMPTS {
            let center = tissue_cells[r.random_range(0..tissue_cells.len())];
            let (cx, cy) = tissue.coords(center);
            let radius = spec.lesion_scale * r.random_range(0.75..1.25);
            let harmonics = random_harmonics(r, 0.15);
            let reach = (radius * 1.5).ceil() as isize + 1;
            let mut blob = Vec::new();
            let mut ok = true;
            'scan: for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let dist = ((dx * dx + dy * dy) as f64).sqrt();
                    let theta = (dy as f64).atan2(dx as f64);
                    if dist > radius * radial_factor(&harmonics, theta) {
                        continue;
                    }
                    let (x, y) = (cx as isize + dx, cy as isize + dy);
                    if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                        ok = false;
                        break 'scan;
                    }
                    let (x, y) = (x as usize, y as usize);
                    if !tissue.get(x, y) || blocked.get(x, y) {
                        ok = false;
                        break 'scan;
                    }
                    blob.push(lesions.index(x, y));
                }
            }
            if !ok || blob.is_empty() {
                continue;
            }
            for &i in &blob {
                lesions.cells_mut()[i] = true;
                blocked.cells_mut()[i] = true;
                let nbrs: Vec<usize> = lesions.neighbors4(i).collect();
                for n in nbrs {
                    blocked.cells_mut()[n] = true;
                }
            }
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    Some(lesions)
}
