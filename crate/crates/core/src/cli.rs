//! Command-line front end: every toolkit capability behind one
//! executable with deterministic, scriptable output. Machine output
//! is line-oriented tab-separated records under a versioned header;
//! table output is aligned for reading. Diagnostics go to stderr.
//!
//! Exit status: 0 on success, 1 when any item failed or a spec was
//! invalid, 2 on usage errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::archspec::{self, NetworkSpec, Shape, ShapeFlow};
use crate::compose;
use crate::imagecore::{
    load_alpha, load_rgb, resize, save_image, AlphaMatte, BitDepth, ImageError, Raster,
};
use crate::losses::{
    self, LossBreakdown, LossCoefficients, LossError, MaskedL1Result, FEATURE_LEVEL_COUNT,
};
use crate::metrics::{self, MetricsError, MetricsReport, PairRecord};
use crate::morphology::{
    binarize, border_map, make_trimap, StructuringElement, TrimapError,
};
use crate::pipeline::{
    self, PipelineError, SynthesisConfig, DEFAULT_BACKGROUNDS_PER_SUBJECT, DEFAULT_PATCH_SIZE,
    TRAINING_HEIGHT, TRAINING_WIDTH,
};

const RECORDS_VERSION_LINE: &str = "mattebench-records v1";
const PIPELINE_MANIFEST_VERSION_LINE: &str = "mattebench-manifest v1";

#[derive(Debug, Error)]
enum CliError {
    #[error("imagecore: {0}")]
    Image(#[from] ImageError),
    #[error("compose: {0}")]
    Compose(#[from] compose::ComposeError),
    #[error("morphology: {0}")]
    Trimap(#[from] TrimapError),
    #[error("losses: {0}")]
    Loss(#[from] LossError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("archspec: {0}")]
    Arch(#[from] archspec::ArchError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// Aligned human-readable table.
    Table,
    /// Tab-separated records under a versioned header line.
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeShapeArg {
    Square,
    Disk,
}

impl SeShapeArg {
    fn element(self, radius: usize) -> StructuringElement {
        match self {
            SeShapeArg::Square => StructuringElement::square(radius),
            SeShapeArg::Disk => StructuringElement::disk(radius),
        }
    }
}

fn parse_bit_depth(s: &str) -> Result<BitDepth, String> {
    match s {
        "8" => Ok(BitDepth::Eight),
        "16" => Ok(BitDepth::Sixteen),
        _ => Err("bit depth must be 8 or 16".to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "mattebench",
    version,
    about = "Portrait-matting toolkit: compositing, masked losses, morphology, matte metrics, dataset synthesis, and network shape checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Blend a foreground over a background through an alpha matte.
    Compose(ComposeArgs),
    /// Multiply an image by its matte to isolate the subject.
    Foreground(ForegroundArgs),
    /// Compute the dilate-minus-erode ring around a segmentation.
    Bordermap(BordermapArgs),
    /// Derive a foreground/unknown/background trimap from a matte.
    Trimap(TrimapArgs),
    /// Evaluate the training losses for a predicted matte.
    Losses(LossesArgs),
    /// Score predicted mattes against ground truth over a manifest.
    Eval(EvalArgs),
    /// Synthesize a composited dataset with a deterministic manifest.
    Synth(SynthArgs),
    /// Build the three-scale image pyramid.
    Pyramid(PyramidArgs),
    /// Extract border-covering patches from an image.
    Patches(PatchesArgs),
    /// Validate a network spec by propagating feature-map shapes.
    Archcheck(ArchcheckArgs),
}

#[derive(Args)]
struct ComposeArgs {
    /// Foreground image (RGB).
    #[arg(long)]
    fg: PathBuf,
    /// Background image (RGB); resized to the foreground dimensions
    /// when they differ.
    #[arg(long)]
    bg: PathBuf,
    /// Alpha matte; must match the foreground dimensions.
    #[arg(long)]
    alpha: PathBuf,
    /// Output path for the composite.
    #[arg(long)]
    out: PathBuf,
    /// Output bit depth per sample.
    #[arg(long, value_parser = parse_bit_depth, default_value = "8")]
    bit_depth: BitDepth,
}

#[derive(Args)]
struct ForegroundArgs {
    /// Input image (RGB).
    #[arg(long)]
    img: PathBuf,
    /// Alpha matte; must match the image dimensions.
    #[arg(long)]
    alpha: PathBuf,
    /// Output path for the masked subject.
    #[arg(long)]
    out: PathBuf,
    /// Output bit depth per sample.
    #[arg(long, value_parser = parse_bit_depth, default_value = "8")]
    bit_depth: BitDepth,
}

#[derive(Args)]
struct BordermapArgs {
    /// Segmentation or matte image, binarized at --fg-threshold.
    #[arg(long)]
    seg: PathBuf,
    /// Foreground threshold in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    fg_threshold: f32,
    /// Structuring-element radius.
    #[arg(long, default_value_t = 5)]
    radius: usize,
    /// Structuring-element shape.
    #[arg(long, value_enum, default_value_t = SeShapeArg::Square)]
    shape: SeShapeArg,
    /// Output path for the border mask (0/255).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct TrimapArgs {
    /// Ground-truth alpha matte.
    #[arg(long)]
    alpha: PathBuf,
    /// Foreground threshold in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    fg_threshold: f32,
    /// Unknown-band structuring-element radius.
    #[arg(long, default_value_t = 5)]
    radius: usize,
    /// Structuring-element shape.
    #[arg(long, value_enum, default_value_t = SeShapeArg::Square)]
    shape: SeShapeArg,
    /// Output path for the trimap (values 0, 128, 255).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct LossesArgs {
    /// Predicted alpha matte.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth alpha matte.
    #[arg(long)]
    gt: PathBuf,
    /// Source image; enables the perceptual term over masked
    /// foregrounds when given.
    #[arg(long)]
    img: Option<PathBuf>,
    /// Binary-pixel tolerance for the alpha/alpha-coefficient masks,
    /// in [0, 0.5).
    #[arg(long, default_value_t = losses::DEFAULT_BINARY_EPS)]
    eps: f32,
    /// Foreground threshold for deriving the border region from the
    /// ground truth.
    #[arg(long, default_value_t = 0.5)]
    fg_threshold: f32,
    /// Border structuring-element radius.
    #[arg(long, default_value_t = 5)]
    radius: usize,
    /// Border structuring-element shape.
    #[arg(long, value_enum, default_value_t = SeShapeArg::Square)]
    shape: SeShapeArg,
    /// Externally computed adversarial term, passed through to the
    /// aggregate.
    #[arg(long, default_value_t = 0.0)]
    cgan: f64,
    /// Perceptual-term weight.
    #[arg(long, default_value_t = 10.0)]
    lambda_per: f64,
    /// Alpha-term weight.
    #[arg(long, default_value_t = 25.0)]
    beta_alpha: f64,
    /// Border-term weight.
    #[arg(long, default_value_t = 50.0)]
    gamma_border: f64,
    /// Alpha-coefficient-term weight.
    #[arg(long, default_value_t = 25.0)]
    theta_ac: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct EvalArgs {
    /// Pair manifest: either tab-separated `pred<TAB>gt` lines or a
    /// synthesis manifest (then --pred-dir is required).
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of predicted mattes named after each composite stem;
    /// used when --manifest is a synthesis manifest.
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    /// Worker threads; defaults to the CPU count.
    #[arg(long, env = "MATTEBENCH_JOBS")]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory of foreground images.
    #[arg(long)]
    fg: PathBuf,
    /// Directory of alpha mattes with basenames matching --fg.
    #[arg(long)]
    alpha: PathBuf,
    /// Directory of background images.
    #[arg(long)]
    bg: PathBuf,
    /// Output directory; receives composite/, alpha/, and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Backgrounds drawn per subject.
    #[arg(long, default_value_t = DEFAULT_BACKGROUNDS_PER_SUBJECT)]
    backgrounds_per_subject: usize,
    /// Master seed for the deterministic background draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target width for prepared inputs.
    #[arg(long, default_value_t = TRAINING_WIDTH)]
    width: usize,
    /// Target height for prepared inputs.
    #[arg(long, default_value_t = TRAINING_HEIGHT)]
    height: usize,
    /// Composite bit depth per sample.
    #[arg(long, value_parser = parse_bit_depth, default_value = "8")]
    bit_depth: BitDepth,
    /// Worker threads; defaults to the CPU count.
    #[arg(long, env = "MATTEBENCH_JOBS")]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct PyramidArgs {
    /// Input image (RGB).
    #[arg(long)]
    img: PathBuf,
    /// Output path for the half-scale level.
    #[arg(long)]
    out_half: PathBuf,
    /// Output path for the quarter-scale level.
    #[arg(long)]
    out_quarter: PathBuf,
    /// Output bit depth per sample.
    #[arg(long, value_parser = parse_bit_depth, default_value = "8")]
    bit_depth: BitDepth,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Args)]
struct PatchesArgs {
    /// Input image (RGB).
    #[arg(long)]
    img: PathBuf,
    /// Segmentation or matte image defining the border region.
    #[arg(long)]
    seg: PathBuf,
    /// Foreground threshold in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    fg_threshold: f32,
    /// Border structuring-element radius.
    #[arg(long, default_value_t = 5)]
    radius: usize,
    /// Border structuring-element shape.
    #[arg(long, value_enum, default_value_t = SeShapeArg::Square)]
    shape: SeShapeArg,
    /// Square patch edge length.
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    patch_size: usize,
    /// Grid stride; defaults to the patch size (non-overlapping).
    #[arg(long)]
    stride: Option<usize>,
    /// Directory receiving one file per patch.
    #[arg(long)]
    out_dir: PathBuf,
    /// Patch bit depth per sample.
    #[arg(long, value_parser = parse_bit_depth, default_value = "8")]
    bit_depth: BitDepth,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BuiltinSpec {
    Generator,
    DiscriminatorFull,
    DiscriminatorHalf,
    DiscriminatorQuarter,
    Refinement,
}

impl BuiltinSpec {
    fn spec(self) -> NetworkSpec {
        match self {
            BuiltinSpec::Generator => archspec::builtin_generator_spec(),
            BuiltinSpec::DiscriminatorFull => {
                archspec::builtin_discriminator_pyramid_spec()[0].clone()
            }
            BuiltinSpec::DiscriminatorHalf => {
                archspec::builtin_discriminator_pyramid_spec()[1].clone()
            }
            BuiltinSpec::DiscriminatorQuarter => {
                archspec::builtin_discriminator_pyramid_spec()[2].clone()
            }
            BuiltinSpec::Refinement => archspec::builtin_refinement_spec(),
        }
    }
}

#[derive(Args)]
struct ArchcheckArgs {
    /// Network spec file to validate; mutually exclusive with
    /// --builtin.
    #[arg(long, conflicts_with = "builtin")]
    spec: Option<PathBuf>,
    /// Builtin topology to validate.
    #[arg(long, value_enum, default_value_t = BuiltinSpec::Generator)]
    builtin: BuiltinSpec,
    /// Probe width; defaults to the spec's declared input.
    #[arg(long)]
    width: Option<usize>,
    /// Probe height; defaults to the spec's declared input.
    #[arg(long)]
    height: Option<usize>,
    /// Probe channels; defaults to the spec's declared input.
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
}

/// Parse the process arguments, run the selected subcommand, and
/// return the exit status.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.cmd {
        Cmd::Compose(args) => cmd_compose(args),
        Cmd::Foreground(args) => cmd_foreground(args),
        Cmd::Bordermap(args) => cmd_bordermap(args),
        Cmd::Trimap(args) => cmd_trimap(args),
        Cmd::Losses(args) => cmd_losses(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::Pyramid(args) => cmd_pyramid(args),
        Cmd::Patches(args) => cmd_patches(args),
        Cmd::Archcheck(args) => cmd_archcheck(args),
    };
    match result {
        Ok(status) => status,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn check_threshold(t: f32) -> Result<(), CliError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(usage(format!("--fg-threshold must be in (0, 1), got {t}")));
    }
    Ok(())
}

fn check_eps(eps: f32) -> Result<(), CliError> {
    if !(0.0..0.5).contains(&eps) {
        return Err(usage(format!("--eps must be in [0, 0.5), got {eps}")));
    }
    Ok(())
}

fn resolve_jobs(jobs: Option<usize>) -> Result<usize, CliError> {
    match jobs {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

fn mask_to_matte(mask: &crate::imagecore::BinaryMask) -> AlphaMatte {
    let data: Vec<f32> = mask
        .data()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    AlphaMatte::from_values(mask.width(), mask.height(), data).unwrap()
}

fn cmd_compose(args: ComposeArgs) -> Result<i32, CliError> {
    let fg = load_rgb(&args.fg)?;
    let mut bg = load_rgb(&args.bg)?;
    let alpha = load_alpha(&args.alpha)?;
    if bg.width() != fg.width() || bg.height() != fg.height() {
        bg = resize(&bg, fg.width(), fg.height())?;
    }
    let out = compose::composite(&fg, &bg, &alpha)?;
    save_image(&out, &args.out, args.bit_depth)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn cmd_foreground(args: ForegroundArgs) -> Result<i32, CliError> {
    let img = load_rgb(&args.img)?;
    let alpha = load_alpha(&args.alpha)?;
    let out = compose::extract_foreground(&img, &alpha)?;
    save_image(&out, &args.out, args.bit_depth)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn cmd_bordermap(args: BordermapArgs) -> Result<i32, CliError> {
    check_threshold(args.fg_threshold)?;
    let seg_img = load_alpha(&args.seg)?;
    let seg = binarize(&seg_img, args.fg_threshold);
    let border = border_map(&seg, &args.shape.element(args.radius));
    save_image(&mask_to_matte(&border.mask), &args.out, BitDepth::Eight)?;
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            println!(
                "bordermap\t{}\t{}\t{}",
                args.out.display(),
                border.mask.count_true(),
                border.source_radius
            );
        }
        OutputFormat::Table => {
            println!(
                "wrote {} ({} border pixels, radius {})",
                args.out.display(),
                border.mask.count_true(),
                border.source_radius
            );
        }
    }
    Ok(0)
}

fn cmd_trimap(args: TrimapArgs) -> Result<i32, CliError> {
    check_threshold(args.fg_threshold)?;
    let alpha = load_alpha(&args.alpha)?;
    let trimap = make_trimap(&alpha, args.fg_threshold, &args.shape.element(args.radius));
    trimap.save(&args.out)?;
    let (bg, unknown, fg) = trimap.counts();
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            println!("trimap\t{}\t{bg}\t{unknown}\t{fg}", args.out.display());
        }
        OutputFormat::Table => {
            println!(
                "wrote {} (background {bg}, unknown {unknown}, foreground {fg})",
                args.out.display()
            );
        }
    }
    Ok(0)
}

struct LossRow {
    name: &'static str,
    sum: f64,
    count: usize,
    mean: f64,
}

impl LossRow {
    fn from_masked(name: &'static str, r: &MaskedL1Result) -> Self {
        Self {
            name,
            sum: r.sum,
            count: r.count,
            mean: r.mean,
        }
    }
}

fn cmd_losses(args: LossesArgs) -> Result<i32, CliError> {
    check_eps(args.eps)?;
    check_threshold(args.fg_threshold)?;
    let coeffs = LossCoefficients {
        lambda_per: args.lambda_per,
        beta_alpha: args.beta_alpha,
        gamma_border: args.gamma_border,
        theta_ac: args.theta_ac,
    };
    let pred = load_alpha(&args.pred)?;
    let gt = load_alpha(&args.gt)?;
    let alpha = losses::alpha_loss(&pred, &gt, args.eps)?;
    let alpha_coeff = losses::alpha_coefficient_loss(&pred, &gt, args.eps)?;
    let border_region = border_map(
        &binarize(&gt, args.fg_threshold),
        &args.shape.element(args.radius),
    );
    let border = losses::border_loss(&pred, &gt, &border_region)?;
    let (perceptual, perceptual_levels) = match &args.img {
        Some(img_path) => {
            let img = load_rgb(img_path)?;
            let pred_fg = compose::extract_foreground(&img, &pred)?;
            let gt_fg = compose::extract_foreground(&img, &gt)?;
            let pred_feats = losses::stub_feature_extractor(&pred_fg)?;
            let gt_feats = losses::stub_feature_extractor(&gt_fg)?;
            (
                losses::perceptual_loss(&pred_feats, &gt_feats)?,
                FEATURE_LEVEL_COUNT,
            )
        }
        None => (0.0, 0),
    };
    let breakdown = LossBreakdown {
        cgan: args.cgan,
        perceptual,
        alpha: alpha.mean,
        border: border.mean,
        alpha_coeff: alpha_coeff.mean,
    };
    let total = losses::total_loss(&breakdown, &coeffs)?;
    let rows = [
        LossRow {
            name: "cgan",
            sum: args.cgan,
            count: 1,
            mean: args.cgan,
        },
        LossRow {
            name: "perceptual",
            sum: perceptual,
            count: perceptual_levels,
            mean: perceptual,
        },
        LossRow::from_masked("alpha", &alpha),
        LossRow::from_masked("border", &border),
        LossRow::from_masked("alpha_coeff", &alpha_coeff),
    ];
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            for row in &rows {
                println!("loss\t{}\t{}\t{}\t{}", row.name, row.sum, row.count, row.mean);
            }
            println!("total\t{total}");
        }
        OutputFormat::Table => {
            println!("{:<12} {:>16} {:>10} {:>16}", "term", "sum", "count", "mean");
            for row in &rows {
                println!(
                    "{:<12} {:>16.9} {:>10} {:>16.9}",
                    row.name, row.sum, row.count, row.mean
                );
            }
            println!("{:<12} {:>16.9}", "total", total);
        }
    }
    Ok(0)
}

fn read_pairs(manifest: &Path, pred_dir: Option<&Path>) -> Result<Vec<PairRecord>, CliError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| {
        CliError::Data(format!("read manifest {}: {e}", manifest.display()))
    })?;
    if text.lines().next() == Some(PIPELINE_MANIFEST_VERSION_LINE) {
        let dir = pred_dir.ok_or_else(|| {
            usage("--pred-dir is required when --manifest is a synthesis manifest")
        })?;
        let synth = pipeline::Manifest::read(manifest)?;
        return Ok(synth
            .records
            .iter()
            .map(|r| {
                let stem = r
                    .composite_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                PairRecord {
                    pred: dir.join(format!("{stem}.png")),
                    gt: r.alpha_path.clone(),
                }
            })
            .collect());
    }
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(CliError::Data(format!(
                "manifest line {}: expected pred<TAB>gt, got {line:?}",
                idx + 1
            )));
        }
        pairs.push(PairRecord {
            pred: PathBuf::from(fields[0]),
            gt: PathBuf::from(fields[1]),
        });
    }
    if pairs.is_empty() {
        return Err(CliError::Data(format!(
            "manifest {} lists no pairs",
            manifest.display()
        )));
    }
    Ok(pairs)
}

fn metric_fields(r: &MetricsReport) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.mse, r.mae, r.sad, r.grad, r.conn, r.mse_scaled, r.mae_scaled
    )
}

fn metric_columns(r: &MetricsReport) -> String {
    format!(
        "{:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
        r.mse, r.mae, r.sad, r.grad, r.conn, r.mse_scaled, r.mae_scaled
    )
}

fn cmd_eval(args: EvalArgs) -> Result<i32, CliError> {
    let jobs = resolve_jobs(args.jobs)?;
    let pairs = read_pairs(&args.manifest, args.pred_dir.as_deref())?;
    let evaluation = metrics::evaluate_dataset(&pairs, jobs);
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            for outcome in &evaluation.outcomes {
                let pred = outcome.record.pred.display();
                let gt = outcome.record.gt.display();
                match &outcome.result {
                    Ok(report) => println!("pair\t{pred}\t{gt}\t{}", metric_fields(report)),
                    Err(msg) => println!("pair-error\t{pred}\t{gt}\t{msg}"),
                }
            }
            match &evaluation.aggregate {
                Some(agg) => println!(
                    "aggregate\t{}\t{}",
                    evaluation.outcomes.len() - evaluation.failures,
                    metric_fields(agg)
                ),
                None => println!("aggregate-empty"),
            }
        }
        OutputFormat::Table => {
            let name_width = evaluation
                .outcomes
                .iter()
                .map(|o| o.record.pred.display().to_string().len())
                .chain(["aggregate".len()])
                .max()
                .unwrap_or(9);
            println!(
                "{:<name_width$} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
                "pred", "mse", "mae", "sad", "grad", "conn", "mse_scaled", "mae_scaled"
            );
            for outcome in &evaluation.outcomes {
                let pred = outcome.record.pred.display().to_string();
                match &outcome.result {
                    Ok(report) => {
                        println!("{pred:<name_width$} {}", metric_columns(report));
                    }
                    Err(msg) => {
                        println!("{pred:<name_width$} failed");
                        eprintln!("error: {pred}: {msg}");
                    }
                }
            }
            if let Some(agg) = &evaluation.aggregate {
                println!("{:<name_width$} {}", "aggregate", metric_columns(agg));
            }
        }
    }
    Ok(if evaluation.failures > 0 { 1 } else { 0 })
}

fn cmd_synth(args: SynthArgs) -> Result<i32, CliError> {
    if args.width == 0 || args.height == 0 {
        return Err(usage("--width and --height must be at least 1"));
    }
    let jobs = resolve_jobs(args.jobs)?;
    let mut config = SynthesisConfig::new(args.fg, args.alpha, args.bg, args.out);
    config.backgrounds_per_subject = args.backgrounds_per_subject;
    config.seed = args.seed;
    config.target_resolution = (args.width, args.height);
    config.bit_depth = args.bit_depth;
    let manifest = pipeline::synthesize_dataset(&config, jobs)?;
    let manifest_path = config.out_dir.join("manifest");
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            println!(
                "synth\t{}\t{}\t{}",
                manifest_path.display(),
                manifest.records.len(),
                manifest.seed
            );
        }
        OutputFormat::Table => {
            println!(
                "wrote {} ({} composites, seed {})",
                manifest_path.display(),
                manifest.records.len(),
                manifest.seed
            );
        }
    }
    Ok(0)
}

fn cmd_pyramid(args: PyramidArgs) -> Result<i32, CliError> {
    let img = load_rgb(&args.img)?;
    let pyramid = pipeline::build_pyramid(&img)?;
    save_image(&pyramid.half, &args.out_half, args.bit_depth)?;
    save_image(&pyramid.quarter, &args.out_quarter, args.bit_depth)?;
    let rows = [
        ("full", &pyramid.full, None::<&Path>),
        ("half", &pyramid.half, Some(args.out_half.as_path())),
        ("quarter", &pyramid.quarter, Some(args.out_quarter.as_path())),
    ];
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            for (name, level, path) in rows {
                let path = path.map(|p| p.display().to_string()).unwrap_or_default();
                println!(
                    "pyramid\t{name}\t{}\t{}\t{path}",
                    level.width(),
                    level.height()
                );
            }
        }
        OutputFormat::Table => {
            for (name, level, path) in rows {
                match path {
                    Some(p) => println!(
                        "{name}: {}x{} -> {}",
                        level.width(),
                        level.height(),
                        p.display()
                    ),
                    None => println!("{name}: {}x{}", level.width(), level.height()),
                }
            }
        }
    }
    Ok(0)
}

fn cmd_patches(args: PatchesArgs) -> Result<i32, CliError> {
    check_threshold(args.fg_threshold)?;
    if args.patch_size == 0 {
        return Err(usage("--patch-size must be at least 1"));
    }
    let stride = args.stride.unwrap_or(args.patch_size);
    if stride == 0 {
        return Err(usage("--stride must be at least 1"));
    }
    let img = load_rgb(&args.img)?;
    let seg_img = load_alpha(&args.seg)?;
    let border = border_map(
        &binarize(&seg_img, args.fg_threshold),
        &args.shape.element(args.radius),
    );
    let set = pipeline::extract_border_patches_with_stride(
        &img,
        &border,
        args.patch_size,
        stride,
    )?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| {
        CliError::Data(format!("create {}: {e}", args.out_dir.display()))
    })?;
    let mut lines = String::new();
    for patch in &set.patches {
        let path = args
            .out_dir
            .join(format!("patch_{:05}_{:05}.png", patch.x, patch.y));
        save_image(&patch.raster, &path, args.bit_depth)?;
        let _ = writeln!(lines, "patch\t{}\t{}\t{}", patch.x, patch.y, path.display());
    }
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            print!("{lines}");
            println!("patches\t{}\t{}", set.patches.len(), set.patch_size);
        }
        OutputFormat::Table => {
            println!(
                "wrote {} patches of {}x{} to {}",
                set.patches.len(),
                set.patch_size,
                set.patch_size,
                args.out_dir.display()
            );
        }
    }
    Ok(0)
}

fn issue_text(flow: &ShapeFlow, idx: usize) -> String {
    match &flow.layers[idx].issue {
        Some(issue) => issue.to_string(),
        None => String::new(),
    }
}

fn cmd_archcheck(args: ArchcheckArgs) -> Result<i32, CliError> {
    let spec = match &args.spec {
        Some(path) => NetworkSpec::read(path)?,
        None => args.builtin.spec(),
    };
    let probe = Shape::new(
        args.width.unwrap_or(spec.declared_input.width),
        args.height.unwrap_or(spec.declared_input.height),
        args.channels.unwrap_or(spec.declared_input.channels),
    );
    if probe.width == 0 || probe.height == 0 || probe.channels == 0 {
        return Err(usage("probe dimensions must be at least 1"));
    }
    let flow = archspec::propagate_shapes(&spec, probe);
    match args.format {
        OutputFormat::Records => {
            println!("{RECORDS_VERSION_LINE}");
            println!("netspec\t{}\t{probe}", spec.name);
            for (i, layer) in flow.layers.iter().enumerate() {
                let shape = layer
                    .shape
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "-".to_string());
                println!(
                    "layer\t{}\t{}\t{shape}\t{}",
                    layer.id,
                    layer.kind,
                    issue_text(&flow, i)
                );
            }
            println!("verdict\t{}", if flow.valid { "valid" } else { "invalid" });
        }
        OutputFormat::Table => {
            println!("{} probed at {probe}", spec.name);
            let id_width = flow
                .layers
                .iter()
                .map(|l| l.id.len())
                .chain(["layer".len()])
                .max()
                .unwrap_or(5);
            println!("{:<id_width$} {:<14} {:<16} issue", "layer", "kind", "shape");
            for (i, layer) in flow.layers.iter().enumerate() {
                let shape = layer
                    .shape
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "-".to_string());
                println!(
                    "{:<id_width$} {:<14} {:<16} {}",
                    layer.id,
                    layer.kind.to_string(),
                    shape,
                    issue_text(&flow, i)
                );
            }
            println!("verdict: {}", if flow.valid { "valid" } else { "invalid" });
        }
    }
    Ok(if flow.valid { 0 } else { 1 })
}
