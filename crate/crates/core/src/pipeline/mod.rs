//! End-to-end orchestration: corpus generation, refinement, evaluation and
//! parameter sweeps.

mod config;
pub mod corpus;
mod refine;
mod report;
mod sweep;

pub use config::{Method, RunConfig};
pub use corpus::{
    generate_corpus, load_slide_dir, synthesize_slide, LoadedSlide, NoiseChoice, Slide,
    SlideManifest,
};
pub use refine::{
    model_init_seed, postprocess_heatmap, refine, refine_multi, refine_with_model, RefineResult,
    Timings,
};
pub use report::{EvalReport, EvalRow, RunSummary, RESULT_VERSION};
pub use sweep::{run_sweep, SweepAxis, SweepConfig, SweepPoint, SweepReport};
