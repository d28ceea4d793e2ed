use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use lcmil::io;
use lcmil::metrics::report;
use lcmil::mil::checkpoint;
use lcmil::pipeline::corpus::{load_slide_files, slide_dir, LoadedSlide};
use lcmil::pipeline::{
    generate_corpus, load_slide_dir, refine, refine_multi, run_sweep, EvalReport, EvalRow, Method,
    NoiseChoice, RunConfig, RunSummary, SweepAxis, SweepConfig,
};
use lcmil::{Error, MaskRole, Result, SynthSpec};

mod config;

use config::with_overrides;

#[derive(Parser)]
#[command(
    name = "lcmil",
    version,
    about = "Refine coarse region annotations on patch lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus of synthetic slides with noisy coarse annotations.
    Generate(GenerateArgs),
    /// Refine one slide's coarse annotation.
    Refine(RefineArgs),
    /// Score predicted masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Repeated trials over bag size, bag count or number of training slides.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseKind {
    S1,
    S2,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    feature_dim: usize,
    #[arg(long, default_value_t = 3)]
    n_lesions: usize,
    #[arg(long, default_value_t = 8.0)]
    lesion_scale: f64,
    #[arg(long, default_value_t = 3.0)]
    class_separation: f64,
    #[arg(long, default_value_t = 1.0)]
    feature_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    slide_jitter: f64,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            width: self.width,
            height: self.height,
            feature_dim: self.feature_dim,
            n_lesions: self.n_lesions,
            lesion_scale: self.lesion_scale,
            class_separation: self.class_separation,
            feature_noise: self.feature_noise,
            slide_jitter: self.slide_jitter,
            seed: 0,
        }
    }
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, value_enum, default_value_t = NoiseKind::S1)]
    noise: NoiseKind,
    /// S-I flip rate for both classes, or `random` for per-slide U(0, 0.5) draws.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long, default_value_t = 0.3)]
    rho0: f64,
    #[arg(long, default_value_t = 0.3)]
    rho1: f64,
    #[arg(long, default_value_t = lcmil::synthgrid::DEFAULT_DILATION_RADIUS)]
    dilation_radius: usize,
    #[arg(long)]
    cut_in_half: bool,
}

impl NoiseArgs {
    fn choice(&self) -> Result<NoiseChoice> {
        Ok(match self.noise {
            NoiseKind::S2 => NoiseChoice::S2 {
                dilation_radius: self.dilation_radius,
                cut_in_half: self.cut_in_half,
            },
            NoiseKind::S1 => match self.rho.as_deref() {
                Some("random") => NoiseChoice::S1Random,
                Some(v) => {
                    let rho: f64 = v.parse().map_err(|_| {
                        Error::Invalid(format!("--rho expects a number or `random`, got `{v}`"))
                    })?;
                    NoiseChoice::S1 {
                        rho0: rho,
                        rho1: rho,
                    }
                }
                None => NoiseChoice::S1 {
                    rho0: self.rho0,
                    rho1: self.rho1,
                },
            },
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    /// JSON file whose fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GenerateConfig {
    seed: u64,
    count: usize,
    synth: SynthSpec,
    noise: NoiseChoice,
}

#[derive(Args)]
struct TrainOverrides {
    #[arg(long)]
    bag_size: Option<usize>,
    #[arg(long)]
    num_bags: Option<usize>,
    /// Neighbours for DkNN.
    #[arg(long)]
    k: Option<usize>,
    /// Folds for Rank Pruning.
    #[arg(long)]
    folds: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.bag_size {
            cfg.train.bag_size = v;
        }
        if let Some(v) = self.num_bags {
            cfg.train.num_bags = v;
        }
        if let Some(v) = self.k {
            cfg.dknn.k = v;
        }
        if let Some(v) = self.folds {
            cfg.rp.folds = v;
        }
    }
}

#[derive(Args)]
struct RefineArgs {
    /// Slide directory written by `generate`.
    #[arg(long, conflicts_with_all = ["grid", "tissue", "coarse", "gt"])]
    slide: Option<PathBuf>,
    #[arg(long, requires_all = ["tissue", "coarse"])]
    grid: Option<PathBuf>,
    #[arg(long)]
    tissue: Option<PathBuf>,
    #[arg(long)]
    coarse: Option<PathBuf>,
    /// Ground truth; adds coarse and refined metrics to the result.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Multi-slide mode: train on these slide directories instead of the target.
    #[arg(long = "train-slide")]
    train_slides: Vec<PathBuf>,
    #[arg(long, default_value = "lc_mil_atten", value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: TrainOverrides,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, requires_all = ["gt", "tissue"], conflicts_with_all = ["corpus", "pred_dir"])]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    tissue: Option<PathBuf>,
    #[arg(long)]
    coarse: Option<PathBuf>,
    /// Batch mode: corpus directory from `generate`.
    #[arg(long, requires = "pred_dir")]
    corpus: Option<PathBuf>,
    /// Batch mode: directory holding one `slide_NNN/<pred-name>` per slide.
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    #[arg(long, default_value = "refined.pgm")]
    pred_name: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_axis)]
    kind: SweepAxis,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    values: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    slides_per_repeat: usize,
    #[arg(long, default_value_t = 4)]
    held_out: usize,
    #[arg(long, default_value = "lc_mil_atten", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> std::result::Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let cfg = GenerateConfig {
        seed: args.seed,
        count: args.count,
        synth: args.synth.spec(),
        noise: args.noise.choice()?,
    };
    let cfg = with_overrides(cfg, args.config.as_deref())?;
    let dirs = generate_corpus(&cfg.synth, &cfg.noise, cfg.seed, cfg.count, &args.out)?;
    write_json(&args.out.join("corpus.json"), &cfg)?;
    println!("generated {} slides in {}", dirs.len(), args.out.display());
    Ok(())
}

fn load_target(args: &RefineArgs) -> Result<(LoadedSlide, Vec<PathBuf>)> {
    if let Some(dir) = &args.slide {
        let slide = load_slide_dir(dir)?;
        let inputs = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        return Ok((slide, inputs));
    }
    match (&args.grid, &args.tissue, &args.coarse) {
        (Some(g), Some(t), Some(c)) => {
            let slide = load_slide_files(g, t, c, args.gt.as_deref())?;
            let mut inputs = vec![g.clone(), t.clone(), c.clone()];
            inputs.extend(args.gt.clone());
            Ok((slide, inputs))
        }
        _ => Err(Error::Invalid(
            "refine needs --slide DIR or all of --grid, --tissue and --coarse".into(),
        )),
    }
}

fn cmd_refine(args: RefineArgs) -> Result<()> {
    let mut cfg = RunConfig {
        method: args.method,
        seed: args.seed,
        ..RunConfig::default()
    };
    args.overrides.apply(&mut cfg);
    let cfg = with_overrides(cfg, args.config.as_deref())?.seeded();
    let (slide, inputs) = load_target(&args)?;

    let outputs = [
        "refined.pgm",
        "heatmap.csv",
        "result.json",
        "loss.csv",
        "model.ckpt",
    ]
    .map(|name| args.out.join(name));
    for out in &outputs {
        if inputs.iter().any(|i| same_file(i, out)) {
            return Err(Error::Invalid(format!(
                "output {} would overwrite an input file",
                out.display()
            )));
        }
    }

    let result = if args.train_slides.is_empty() {
        refine(
            &slide.grid,
            &slide.coarse,
            slide.ground_truth.as_ref(),
            &cfg,
        )?
    } else {
        let train: Vec<LoadedSlide> = args
            .train_slides
            .iter()
            .map(|d| load_slide_dir(d))
            .collect::<Result<_>>()?;
        let pairs: Vec<_> = train.iter().map(|s| (&s.grid, &s.coarse)).collect();
        refine_multi(
            &pairs,
            &slide.grid,
            &slide.coarse,
            slide.ground_truth.as_ref(),
            &cfg,
        )?
    };

    fs::create_dir_all(&args.out)?;
    let [mask_path, heatmap_path, result_path, loss_path, model_path] = &outputs;
    io::save_mask(mask_path, &result.refined.grid)?;
    if let Some(map) = &result.heatmap {
        io::save_heatmap(heatmap_path, map)?;
    }
    if let Some(trace) = &result.loss_trace {
        trace.write_csv(fs::File::create(loss_path)?)?;
    }
    if let Some(model) = &result.model {
        checkpoint::save(model, fs::File::create(model_path)?)?;
    }
    let summary = RunSummary::new(&result, &cfg);
    fs::write(result_path, summary.to_json()?)?;

    print!(
        "{}: {} refined positive cells",
        cfg.method, summary.refined_positive_cells
    );
    if let Some(t) = summary.threshold {
        print!(
            ", v0 = {t:.4}{}",
            if summary.threshold_fallback {
                " (fallback)"
            } else {
                ""
            }
        );
    }
    if let (Some(c), Some(r)) = (&summary.coarse_metrics, &summary.refined_metrics) {
        print!(", F1 {:.4} -> {:.4}", c.f1, r.f1);
    }
    println!();
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn eval_row(name: String, pred: &Path, slide: &LoadedSlide) -> Result<EvalRow> {
    let gt = slide
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::Invalid(format!("{name}: no ground truth")))?;
    let pred = io::load_mask(pred, MaskRole::Refined)?;
    let tissue = slide.grid.tissue();
    Ok(EvalRow {
        refined: report(&pred, gt, tissue)?,
        coarse: Some(report(&slide.coarse, gt, tissue)?),
        slide: name,
    })
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let rows = if let (Some(corpus), Some(pred_dir)) = (&args.corpus, &args.pred_dir) {
        let mut rows = Vec::new();
        for i in 0.. {
            let dir = slide_dir(corpus, i);
            if !dir.is_dir() {
                break;
            }
            let slide = load_slide_dir(&dir)?;
            let name = dir.file_name().unwrap().to_string_lossy().into_owned();
            let pred = slide_dir(pred_dir, i).join(&args.pred_name);
            rows.push(eval_row(name, &pred, &slide)?);
        }
        rows
    } else {
        let (Some(pred), Some(gt), Some(tissue)) = (&args.pred, &args.gt, &args.tissue) else {
            return Err(Error::Invalid(
                "evaluate needs --pred, --gt and --tissue, or --corpus with --pred-dir".into(),
            ));
        };
        let tissue = io::load_mask(tissue, MaskRole::GroundTruth)?.grid;
        let gt = io::load_mask(gt, MaskRole::GroundTruth)?;
        let pred = io::load_mask(pred, MaskRole::Refined)?;
        let coarse = args
            .coarse
            .as_deref()
            .map(|p| io::load_mask(p, MaskRole::Coarse))
            .transpose()?;
        vec![EvalRow {
            slide: args.pred.as_ref().unwrap().display().to_string(),
            refined: report(&pred, &gt, &tissue)?,
            coarse: coarse.map(|c| report(&c, &gt, &tissue)).transpose()?,
        }]
    };

    let rep = EvalReport::new(rows)?;
    fs::create_dir_all(&args.out)?;
    rep.write_csv(fs::File::create(args.out.join("metrics.csv"))?)?;
    fs::write(args.out.join("metrics.json"), rep.to_json()?)?;
    let mut listing = String::from("rank,slide,coarse_f1,refined_f1\n");
    for (rank, row) in rep.sorted_by_coarse_f1().into_iter().enumerate() {
        let coarse = row
            .coarse
            .as_ref()
            .map(|c| format!("{:.6}", c.f1))
            .unwrap_or_default();
        listing.push_str(&format!(
            "{rank},{},{coarse},{:.6}\n",
            row.slide, row.refined.f1
        ));
    }
    fs::write(args.out.join("sorted_by_coarse_f1.csv"), listing)?;

    for name in lcmil::metrics::METRIC_NAMES {
        let ms = rep.refined.get(name).unwrap();
        println!("{name:>4}  {:.4} ± {:.4}", ms.mean, ms.std);
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut synth = args.synth.spec();
    synth.seed = args.seed;
    let cfg = SweepConfig {
        axis: args.kind,
        values: args.values.clone(),
        repeats: args.repeats,
        slides_per_repeat: args.slides_per_repeat,
        held_out: args.held_out,
        run: RunConfig::new(args.method, args.seed),
        synth,
        noise: args.noise.choice()?,
        seed: args.seed,
    };
    let cfg = with_overrides(cfg, args.config.as_deref())?;
    let rep = run_sweep(&cfg)?;
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("sweep.json"), &rep)?;
    fs::write(args.out.join("sweep.csv"), rep.to_csv())?;
    for p in &rep.points {
        println!(
            "{} = {:>5}: F1 {:.4} ± {:.4}",
            rep.axis, p.value, p.f1_mean, p.f1_std
        );
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DegenerateAnnotation(_) => 3,
        Error::NonFiniteLoss { .. } | Error::DegenerateHistogram { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
