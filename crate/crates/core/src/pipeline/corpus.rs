use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnnotationMask, MaskRole, PatchGrid};
use crate::io;
use crate::rng;
use crate::synthgrid::{generate_synthetic_slide, NoiseSpec, NoiseVariant, SynthSpec};

pub const MANIFEST_VERSION: u32 = 1;
pub const GRID_FILE: &str = "grid.txt";
pub const TISSUE_FILE: &str = "tissue.pgm";
pub const GT_FILE: &str = "gt.pgm";
pub const COARSE_FILE: &str = "coarse.pgm";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Upper bound of the flip rates drawn by [`NoiseChoice::S1Random`].
pub const RANDOM_RHO_MAX: f64 = 0.5;

/// How coarse annotations are derived for a generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseChoice {
    S1 {
        rho0: f64,
        rho1: f64,
    },
    /// Per-slide `rho0`, `rho1` drawn from `U(0, 0.5)`.
    S1Random,
    S2 {
        dilation_radius: usize,
        cut_in_half: bool,
    },
}

impl NoiseChoice {
    /// Concrete noise for a slide generated with `slide_seed`.
    pub fn resolve(&self, slide_seed: u64) -> NoiseSpec {
        let variant = match *self {
            NoiseChoice::S1 { rho0, rho1 } => NoiseVariant::S1 { rho0, rho1 },
            NoiseChoice::S1Random => {
                let mut r = rng::stream(slide_seed, 60);
                NoiseVariant::S1 {
                    rho0: r.random_range(0.0..RANDOM_RHO_MAX),
                    rho1: r.random_range(0.0..RANDOM_RHO_MAX),
                }
            }
            NoiseChoice::S2 {
                dilation_radius,
                cut_in_half,
            } => NoiseVariant::S2 {
                dilation_radius,
                cut_in_half,
            },
        };
        NoiseSpec {
            variant,
            seed: slide_seed,
        }
    }
}

/// One generated slide held in memory.
#[derive(Clone, Debug)]
pub struct Slide {
    pub grid: PatchGrid,
    pub ground_truth: AnnotationMask,
    pub coarse: AnnotationMask,
    pub manifest: SlideManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlideFiles {
    pub grid: String,
    pub tissue: String,
    pub ground_truth: String,
    pub coarse: String,
}

impl Default for SlideFiles {
    fn default() -> Self {
        Self {
            grid: GRID_FILE.into(),
            tissue: TISSUE_FILE.into(),
            ground_truth: GT_FILE.into(),
            coarse: COARSE_FILE.into(),
        }
    }
}

/// Everything needed to regenerate a slide bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlideManifest {
    pub version: u32,
    pub index: usize,
    pub master_seed: u64,
    pub synth: SynthSpec,
    pub noise: NoiseSpec,
    pub files: SlideFiles,
}

/// Seed of slide `index` in a corpus generated from `master`.
pub fn slide_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add(index as u64)
}

pub fn synthesize_from_manifest(manifest: &SlideManifest) -> Result<Slide> {
    let (grid, ground_truth) = generate_synthetic_slide(&manifest.synth)?;
    let coarse = manifest
        .noise
        .apply(&ground_truth, grid.tissue())?
        .with_role(MaskRole::Coarse);
    Ok(Slide {
        grid,
        ground_truth,
        coarse,
        manifest: manifest.clone(),
    })
}

/// Slide `index` of a corpus with the given base spec and noise.
pub fn synthesize_slide(
    base: &SynthSpec,
    noise: &NoiseChoice,
    master: u64,
    index: usize,
) -> Result<Slide> {
    let seed = slide_seed(master, index);
    let manifest = SlideManifest {
        version: MANIFEST_VERSION,
        index,
        master_seed: master,
        synth: base.clone().with_seed(seed),
        noise: noise.resolve(seed),
        files: SlideFiles::default(),
    };
    synthesize_from_manifest(&manifest)
}

pub fn slide_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("slide_{index:03}"))
}

/// Writes the slide's files plus its manifest into `dir`.
pub fn write_slide(slide: &Slide, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let f = &slide.manifest.files;
    io::save_grid(&dir.join(&f.grid), &slide.grid)?;
    io::save_mask(&dir.join(&f.tissue), slide.grid.tissue())?;
    io::save_mask(&dir.join(&f.ground_truth), &slide.ground_truth.grid)?;
    io::save_mask(&dir.join(&f.coarse), &slide.coarse.grid)?;
    let json = serde_json::to_string_pretty(&slide.manifest)?;
    fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
    Ok(())
}

/// Generates `count` slides under `out/slide_NNN/`.
pub fn generate_corpus(
    base: &SynthSpec,
    noise: &NoiseChoice,
    master: u64,
    count: usize,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if count == 0 {
        return Err(Error::invalid("corpus size must be at least 1"));
    }
    base.validate()?;
    (0..count)
        .map(|i| {
            let slide = synthesize_slide(base, noise, master, i)?;
            let dir = slide_dir(out, i);
            write_slide(&slide, &dir)?;
            Ok(dir)
        })
        .collect()
}

pub fn read_manifest(dir: &Path) -> Result<SlideManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)?;
    let m: SlideManifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::parse(
            path.display().to_string(),
            format!("unsupported manifest version {}", m.version),
        ));
    }
    Ok(m)
}

/// Slide loaded from disk; the ground truth is optional.
#[derive(Clone, Debug)]
pub struct LoadedSlide {
    pub grid: PatchGrid,
    pub coarse: AnnotationMask,
    pub ground_truth: Option<AnnotationMask>,
}

pub fn load_slide_files(
    grid_path: &Path,
    tissue_path: &Path,
    coarse_path: &Path,
    gt_path: Option<&Path>,
) -> Result<LoadedSlide> {
    let tissue = io::load_mask(tissue_path, MaskRole::GroundTruth)?.grid;
    let grid = io::load_grid(grid_path, tissue)?;
    let coarse = io::load_mask(coarse_path, MaskRole::Coarse)?;
    coarse.validate_against(grid.tissue())?;
    let ground_truth = gt_path
        .map(|p| io::load_mask(p, MaskRole::GroundTruth))
        .transpose()?;
    if let Some(gt) = &ground_truth {
        gt.validate_against(grid.tissue())?;
    }
    Ok(LoadedSlide {
        grid,
        coarse,
        ground_truth,
    })
}

/// Loads a slide directory written by [`write_slide`].
pub fn load_slide_dir(dir: &Path) -> Result<LoadedSlide> {
    let files = read_manifest(dir).map(|m| m.files).unwrap_or_default();
    let gt = dir.join(&files.ground_truth);
    load_slide_files(
        &dir.join(&files.grid),
        &dir.join(&files.tissue),
        &dir.join(&files.coarse),
        gt.exists().then_some(gt.as_path()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_rho_is_seeded_and_bounded() {
        let a = NoiseChoice::S1Random.resolve(5);
        assert_eq!(a, NoiseChoice::S1Random.resolve(5));
        match a.variant {
            NoiseVariant::S1 { rho0, rho1 } => {
                assert!((0.0..0.5).contains(&rho0) && (0.0..0.5).contains(&rho1));
            }
            _ => unreachable!(),
        }
        assert_ne!(a, NoiseChoice::S1Random.resolve(6));
    }

    #[test]
    fn written_slide_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let noise = NoiseChoice::S1 {
            rho0: 0.2,
            rho1: 0.1,
        };
        let paths = generate_corpus(&SynthSpec::default(), &noise, 9, 2, dir.path()).unwrap();
        let slide = synthesize_slide(&SynthSpec::default(), &noise, 9, 1).unwrap();
        let loaded = load_slide_dir(&paths[1]).unwrap();
        assert_eq!(loaded.grid, slide.grid);
        assert_eq!(loaded.coarse.grid, slide.coarse.grid);
        assert_eq!(loaded.ground_truth.unwrap().grid, slide.ground_truth.grid);
        assert_eq!(read_manifest(&paths[1]).unwrap().synth.seed, 10);
    }
}
