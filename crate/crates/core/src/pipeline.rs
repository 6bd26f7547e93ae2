//! Dataset synthesis with reproducible manifests, training-resolution
//! preparation, multi-scale image pyramids, and border-patch
//! extraction and stitching.
//!
//! Synthesis is a pure function of the configuration and the input
//! directory contents: the same seed pairs the same backgrounds with
//! the same subjects and writes byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compose::{self, ComposeError};
use crate::imagecore::{
    load_alpha, load_rgb, resize, save_image, BitDepth, ImageError, Raster, RgbImage,
};
use crate::losses::LossCoefficients;
use crate::morphology::BorderMap;

/// Width every training input is resized to.
pub const TRAINING_WIDTH: usize = 1280;
/// Height every training input is resized to.
pub const TRAINING_HEIGHT: usize = 768;
/// Default edge length of refinement patches.
pub const DEFAULT_PATCH_SIZE: usize = 64;
/// Default number of backgrounds composited with each subject.
pub const DEFAULT_BACKGROUNDS_PER_SUBJECT: usize = 100;

const MANIFEST_VERSION_LINE: &str = "mattebench-manifest v1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("subject {subject} has no matching file in the alpha directory")]
    MissingAlpha { subject: String },
    #[error("need {needed} backgrounds but the directory holds {available}")]
    InsufficientBackgrounds { needed: usize, available: usize },
    #[error("{what}: foreground is {fg_w}x{fg_h} but alpha is {alpha_w}x{alpha_h}")]
    SubjectDimensionMismatch {
        what: String,
        fg_w: usize,
        fg_h: usize,
        alpha_w: usize,
        alpha_h: usize,
    },
    #[error("border map is {border_w}x{border_h} but the raster is {raster_w}x{raster_h}")]
    BorderDimensionMismatch {
        border_w: usize,
        border_h: usize,
        raster_w: usize,
        raster_h: usize,
    },
    #[error("patch size {patch_size} exceeds raster dimensions {width}x{height}")]
    PatchLargerThanImage {
        patch_size: usize,
        width: usize,
        height: usize,
    },
    #[error("patch size must be >= 1")]
    ZeroPatchSize,
    #[error("patch stride must satisfy 1 <= stride <= patch size, got {stride} for size {patch_size}")]
    BadStride { stride: usize, patch_size: usize },
    #[error("patch at ({x}, {y}) size {size} does not fit the {width}x{height} base")]
    PatchOutOfBounds {
        x: usize,
        y: usize,
        size: usize,
        width: usize,
        height: usize,
    },
    #[error("patch set was cut from a {set_w}x{set_h} raster but the base is {base_w}x{base_h}")]
    PatchSourceMismatch {
        set_w: usize,
        set_h: usize,
        base_w: usize,
        base_h: usize,
    },
    #[error("raster {width}x{height} is too small for a quarter-scale pyramid (need 4x4)")]
    TooSmallForPyramid { width: usize, height: usize },
    #[error("manifest path {path} contains a tab or newline and cannot be serialized")]
    UnserializablePath { path: PathBuf },
    #[error("manifest starts with {found:?}, expected {MANIFEST_VERSION_LINE:?}")]
    UnsupportedManifestVersion { found: String },
    #[error("manifest line {line_no}: {reason}: {line:?}")]
    MalformedManifest {
        line_no: usize,
        reason: &'static str,
        line: String,
    },
    #[error("{context} {path}: {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

fn io_err<'a>(
    context: &'static str,
    path: &'a Path,
) -> impl FnOnce(std::io::Error) -> PipelineError + 'a {
    move |source| PipelineError::Io {
        context,
        path: path.to_path_buf(),
        source,
    }
}

/// Inputs and knobs of one synthesis run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub fg_dir: PathBuf,
    pub alpha_dir: PathBuf,
    pub bg_dir: PathBuf,
    pub out_dir: PathBuf,
    pub backgrounds_per_subject: usize,
    pub seed: u64,
    pub target_resolution: (usize, usize),
    pub bit_depth: BitDepth,
}

impl SynthesisConfig {
    pub fn new(fg_dir: PathBuf, alpha_dir: PathBuf, bg_dir: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            fg_dir,
            alpha_dir,
            bg_dir,
            out_dir,
            backgrounds_per_subject: DEFAULT_BACKGROUNDS_PER_SUBJECT,
            seed: 0,
            target_resolution: (TRAINING_WIDTH, TRAINING_HEIGHT),
            bit_depth: BitDepth::Eight,
        }
    }
}

/// Optimizer and schedule constants carried in manifests for
/// provenance. No training loop runs here.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub batch_size: usize,
    /// The discriminator advances `.0` steps for every `.1` generator
    /// steps.
    pub d_steps_per_g_steps: (u32, u32),
    pub loss_coefficients: LossCoefficients,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            generator_lr: 1e-4,
            discriminator_lr: 1e-5,
            batch_size: 1,
            d_steps_per_g_steps: (1, 5),
            loss_coefficients: LossCoefficients::default(),
        }
    }
}

/// One synthesized composite and the files that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub composite_path: PathBuf,
    pub alpha_path: PathBuf,
    pub fg_source: PathBuf,
    pub bg_source: PathBuf,
    pub seed_used: u64,
}

/// Synthesis output listing: a header echoing the configuration and
/// one record per composite, in deterministic subject order.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub backgrounds_per_subject: usize,
    pub seed: u64,
    pub target_resolution: (usize, usize),
    pub bit_depth: BitDepth,
    pub training: TrainingConfig,
    pub records: Vec<ManifestRecord>,
}

fn path_field(path: &Path) -> Result<&str, PipelineError> {
    let s = path.to_str().ok_or_else(|| PipelineError::UnserializablePath {
        path: path.to_path_buf(),
    })?;
    if s.contains('\t') || s.contains('\n') {
        return Err(PipelineError::UnserializablePath {
            path: path.to_path_buf(),
        });
    }
    Ok(s)
}

impl Manifest {
    /// Render the line-oriented text form. Field order is fixed, so
    /// equal manifests serialize byte-identically.
    pub fn to_text(&self) -> Result<String, PipelineError> {
        let mut out = String::new();
        out.push_str(MANIFEST_VERSION_LINE);
        out.push('\n');
        out.push_str(&format!(
            "backgrounds_per_subject\t{}\n",
            self.backgrounds_per_subject
        ));
        out.push_str(&format!("seed\t{}\n", self.seed));
        out.push_str(&format!(
            "target_resolution\t{}x{}\n",
            self.target_resolution.0, self.target_resolution.1
        ));
        out.push_str(&format!(
            "bit_depth\t{}\n",
            match self.bit_depth {
                BitDepth::Eight => 8,
                BitDepth::Sixteen => 16,
            }
        ));
        out.push_str(&format!("generator_lr\t{}\n", self.training.generator_lr));
        out.push_str(&format!(
            "discriminator_lr\t{}\n",
            self.training.discriminator_lr
        ));
        out.push_str(&format!("batch_size\t{}\n", self.training.batch_size));
        out.push_str(&format!(
            "d_steps_per_g_steps\t{}/{}\n",
            self.training.d_steps_per_g_steps.0, self.training.d_steps_per_g_steps.1
        ));
        let c = &self.training.loss_coefficients;
        out.push_str(&format!(
            "loss_coefficients\t{} {} {} {}\n",
            c.lambda_per, c.beta_alpha, c.gamma_border, c.theta_ac
        ));
        out.push_str(&format!("records\t{}\n", self.records.len()));
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                path_field(&r.composite_path)?,
                path_field(&r.alpha_path)?,
                path_field(&r.fg_source)?,
                path_field(&r.bg_source)?,
                r.seed_used
            ));
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let text = self.to_text()?;
        let mut file = fs::File::create(path).map_err(io_err("create manifest", path))?;
        file.write_all(text.as_bytes())
            .map_err(io_err("write manifest", path))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err("read manifest", path))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        let mut lines = text.lines().enumerate();
        let (_, version) = lines.next().ok_or(PipelineError::UnsupportedManifestVersion {
            found: String::new(),
        })?;
        if version != MANIFEST_VERSION_LINE {
            return Err(PipelineError::UnsupportedManifestVersion {
                found: version.to_string(),
            });
        }

        let mut field = |name: &'static str| -> Result<(usize, String), PipelineError> {
            let (idx, line) = lines.next().ok_or(PipelineError::MalformedManifest {
                line_no: 0,
                reason: "missing header field",
                line: name.to_string(),
            })?;
            let (key, value) = line.split_once('\t').ok_or_else(|| {
                PipelineError::MalformedManifest {
                    line_no: idx + 1,
                    reason: "header field is not key<TAB>value",
                    line: line.to_string(),
                }
            })?;
            if key != name {
                return Err(PipelineError::MalformedManifest {
                    line_no: idx + 1,
                    reason: "unexpected header field",
                    line: line.to_string(),
                });
            }
            Ok((idx + 1, value.to_string()))
        };

        fn parse<T: std::str::FromStr>(
            (line_no, value): (usize, String),
            reason: &'static str,
        ) -> Result<T, PipelineError> {
            value.parse().map_err(|_| PipelineError::MalformedManifest {
                line_no,
                reason,
                line: value,
            })
        }

        let backgrounds_per_subject = parse(field("backgrounds_per_subject")?, "bad count")?;
        let seed = parse(field("seed")?, "bad seed")?;
        let (res_line, res) = field("target_resolution")?;
        let target_resolution = res
            .split_once('x')
            .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
            .ok_or_else(|| PipelineError::MalformedManifest {
                line_no: res_line,
                reason: "bad resolution",
                line: res.clone(),
            })?;
        let (depth_line, depth) = field("bit_depth")?;
        let bit_depth = match depth.as_str() {
            "8" => BitDepth::Eight,
            "16" => BitDepth::Sixteen,
            _ => {
                return Err(PipelineError::MalformedManifest {
                    line_no: depth_line,
                    reason: "bad bit depth",
                    line: depth,
                })
            }
        };
        let generator_lr = parse(field("generator_lr")?, "bad learning rate")?;
        let discriminator_lr = parse(field("discriminator_lr")?, "bad learning rate")?;
        let batch_size = parse(field("batch_size")?, "bad batch size")?;
        let (ratio_line, ratio) = field("d_steps_per_g_steps")?;
        let d_steps_per_g_steps = ratio
            .split_once('/')
            .and_then(|(d, g)| Some((d.parse().ok()?, g.parse().ok()?)))
            .ok_or_else(|| PipelineError::MalformedManifest {
                line_no: ratio_line,
                reason: "bad step ratio",
                line: ratio.clone(),
            })?;
        let (coeff_line, coeffs) = field("loss_coefficients")?;
        let parts: Vec<f64> = coeffs
            .split(' ')
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| PipelineError::MalformedManifest {
                line_no: coeff_line,
                reason: "bad coefficients",
                line: coeffs.clone(),
            })?;
        if parts.len() != 4 {
            return Err(PipelineError::MalformedManifest {
                line_no: coeff_line,
                reason: "expected 4 coefficients",
                line: coeffs,
            });
        }
        let loss_coefficients = LossCoefficients {
            lambda_per: parts[0],
            beta_alpha: parts[1],
            gamma_border: parts[2],
            theta_ac: parts[3],
        };
        let record_count: usize = parse(field("records")?, "bad record count")?;

        let mut records = Vec::with_capacity(record_count);
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(PipelineError::MalformedManifest {
                    line_no: idx + 1,
                    reason: "record needs 5 tab-separated fields",
                    line: line.to_string(),
                });
            }
            let seed_used = fields[4].parse().map_err(|_| PipelineError::MalformedManifest {
                line_no: idx + 1,
                reason: "bad record seed",
                line: line.to_string(),
            })?;
            records.push(ManifestRecord {
                composite_path: PathBuf::from(fields[0]),
                alpha_path: PathBuf::from(fields[1]),
                fg_source: PathBuf::from(fields[2]),
                bg_source: PathBuf::from(fields[3]),
                seed_used,
            });
        }
        if records.len() != record_count {
            return Err(PipelineError::MalformedManifest {
                line_no: 0,
                reason: "record count does not match header",
                line: format!("header {record_count}, found {}", records.len()),
            });
        }
        Ok(Manifest {
            backgrounds_per_subject,
            seed,
            target_resolution,
            bit_depth,
            training: TrainingConfig {
                generator_lr,
                discriminator_lr,
                batch_size,
                d_steps_per_g_steps,
                loss_coefficients,
            },
            records,
        })
    }
}

/// Regular files in `dir`, sorted by file name for a stable order.
fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err("read directory", dir))? {
        let entry = entry.map_err(io_err("read directory", dir))?;
        let path = entry.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

struct SubjectPlan {
    fg: PathBuf,
    alpha: PathBuf,
    stem: String,
    seed_used: u64,
    bg_choices: Vec<usize>,
}

/// Composite every subject over per-subject shuffled backgrounds and
/// write the output tree (`composite/`, `alpha/`, `manifest`). Work
/// spreads across at most `jobs` workers; outputs and the returned
/// manifest do not depend on the worker count.
pub fn synthesize_dataset(
    config: &SynthesisConfig,
    jobs: usize,
) -> Result<Manifest, PipelineError> {
    let fg_files = sorted_files(&config.fg_dir)?;
    let bg_files = sorted_files(&config.bg_dir)?;
    if bg_files.len() < config.backgrounds_per_subject {
        return Err(PipelineError::InsufficientBackgrounds {
            needed: config.backgrounds_per_subject,
            available: bg_files.len(),
        });
    }

    // Subject seeds are drawn once, in subject order, from a master
    // generator so parallel workers need no shared state.
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut plans = Vec::with_capacity(fg_files.len());
    for fg in &fg_files {
        let name = fg.file_name().expect("listed file has a name");
        let stem = fg
            .file_stem()
            .expect("listed file has a stem")
            .to_string_lossy()
            .into_owned();
        let alpha = config.alpha_dir.join(name);
        if !alpha.is_file() {
            return Err(PipelineError::MissingAlpha {
                subject: name.to_string_lossy().into_owned(),
            });
        }
        let seed_used: u64 = master.random();
        let mut rng = ChaCha8Rng::seed_from_u64(seed_used);
        let mut indices: Vec<usize> = (0..bg_files.len()).collect();
        indices.shuffle(&mut rng);
        indices.truncate(config.backgrounds_per_subject);
        plans.push(SubjectPlan {
            fg: fg.clone(),
            alpha: alpha.clone(),
            stem,
            seed_used,
            bg_choices: indices,
        });
    }

    let composite_dir = config.out_dir.join("composite");
    let alpha_out_dir = config.out_dir.join("alpha");
    fs::create_dir_all(&composite_dir).map_err(io_err("create directory", &composite_dir))?;
    fs::create_dir_all(&alpha_out_dir).map_err(io_err("create directory", &alpha_out_dir))?;

    let synthesize_subject = |plan: &SubjectPlan| -> Result<Vec<ManifestRecord>, PipelineError> {
        let fg_img = load_rgb(&plan.fg)?;
        let alpha_img = load_alpha(&plan.alpha)?;
        let (fw, fh) = (fg_img.width(), fg_img.height());
        let (aw, ah) = (alpha_img.plane().width(), alpha_img.plane().height());
        if (fw, fh) != (aw, ah) {
            return Err(PipelineError::SubjectDimensionMismatch {
                what: plan.stem.clone(),
                fg_w: fw,
                fg_h: fh,
                alpha_w: aw,
                alpha_h: ah,
            });
        }
        let alpha_copy = alpha_out_dir.join(format!("{}.png", plan.stem));
        fs::copy(&plan.alpha, &alpha_copy).map_err(io_err("copy alpha", &alpha_copy))?;
        let mut records = Vec::with_capacity(plan.bg_choices.len());
        for (k, &bg_idx) in plan.bg_choices.iter().enumerate() {
            let bg_path = &bg_files[bg_idx];
            let bg_img = load_rgb(bg_path)?;
            let bg_sized = resize(&bg_img, fw, fh)?;
            let comp = compose::composite(&fg_img, &bg_sized, &alpha_img)?;
            let comp_path = composite_dir.join(format!("{}_{k:04}.png", plan.stem));
            save_image(&comp, &comp_path, config.bit_depth)?;
            records.push(ManifestRecord {
                composite_path: comp_path,
                alpha_path: alpha_copy.clone(),
                fg_source: plan.fg.clone(),
                bg_source: bg_path.clone(),
                seed_used: plan.seed_used,
            });
        }
        Ok(records)
    };

    let per_subject: Vec<Result<Vec<ManifestRecord>, PipelineError>> = if jobs <= 1 {
        plans.iter().map(synthesize_subject).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("worker pool construction");
        pool.install(|| {
            use rayon::prelude::*;
            plans.par_iter().map(synthesize_subject).collect()
        })
    };

    let mut records = Vec::new();
    for subject in per_subject {
        records.extend(subject?);
    }
    let manifest = Manifest {
        backgrounds_per_subject: config.backgrounds_per_subject,
        seed: config.seed,
        target_resolution: config.target_resolution,
        bit_depth: config.bit_depth,
        training: TrainingConfig::default(),
        records,
    };
    manifest.write(&config.out_dir.join("manifest"))?;
    Ok(manifest)
}

/// Resize to the fixed training resolution (aspect not preserved).
pub fn prepare_training_input(img: &RgbImage) -> Result<RgbImage, PipelineError> {
    Ok(resize(img, TRAINING_WIDTH, TRAINING_HEIGHT)?)
}

/// Full raster with box-filtered half and quarter scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid<R> {
    pub full: R,
    pub half: R,
    pub quarter: R,
}

fn box_downsample<R: Raster>(img: &R, factor: usize) -> R {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let out_w = w.div_ceil(factor);
    let out_h = h.div_ceil(factor);
    let src = img.samples();
    let mut data = Vec::with_capacity(out_w * out_h * c);
    for by in 0..out_h {
        for bx in 0..out_w {
            let x0 = bx * factor;
            let y0 = by * factor;
            let x1 = (x0 + factor).min(w);
            let y1 = (y0 + factor).min(h);
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            for ch in 0..c {
                let mut acc = 0.0f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        acc += src[(y * w + x) * c + ch] as f64;
                    }
                }
                data.push((acc / n) as f32);
            }
        }
    }
    R::from_samples(out_w, out_h, c, data).expect("downsample yields valid raster")
}

/// Half (2x2 box) and quarter (4x4 box, from the full scale) versions
/// alongside the original. Output dims are ceil of full/2 and full/4.
pub fn build_pyramid<R: Raster>(img: &R) -> Result<Pyramid<R>, PipelineError> {
    if img.width() < 4 || img.height() < 4 {
        return Err(PipelineError::TooSmallForPyramid {
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(Pyramid {
        full: img.clone(),
        half: box_downsample(img, 2),
        quarter: box_downsample(img, 4),
    })
}

/// One square cutout and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch<R> {
    pub x: usize,
    pub y: usize,
    pub raster: R,
}

/// Patches cut around a border region, with enough provenance to
/// stitch them back.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet<R> {
    pub patch_size: usize,
    pub source_width: usize,
    pub source_height: usize,
    pub patches: Vec<Patch<R>>,
}

fn crop<R: Raster>(img: &R, x0: usize, y0: usize, size: usize) -> R {
    let c = img.channels();
    let src = img.samples();
    let mut data = Vec::with_capacity(size * size * c);
    for y in y0..y0 + size {
        let row = (y * img.width() + x0) * c;
        data.extend_from_slice(&src[row..row + size * c]);
    }
    R::from_samples(size, size, c, data).expect("crop yields valid raster")
}

/// Cut patches on a grid anchored at the border bounding box with the
/// given stride, clamped inward at image edges; keep only patches
/// containing at least one border pixel. Every border pixel ends up
/// covered when `stride <= patch_size`.
pub fn extract_border_patches_with_stride<R: Raster>(
    img: &R,
    border: &BorderMap,
    patch_size: usize,
    stride: usize,
) -> Result<PatchSet<R>, PipelineError> {
    if patch_size == 0 {
        return Err(PipelineError::ZeroPatchSize);
    }
    if stride == 0 || stride > patch_size {
        return Err(PipelineError::BadStride { stride, patch_size });
    }
    let (w, h) = (img.width(), img.height());
    if border.mask.width() != w || border.mask.height() != h {
        return Err(PipelineError::BorderDimensionMismatch {
            border_w: border.mask.width(),
            border_h: border.mask.height(),
            raster_w: w,
            raster_h: h,
        });
    }
    if patch_size > w || patch_size > h {
        return Err(PipelineError::PatchLargerThanImage {
            patch_size,
            width: w,
            height: h,
        });
    }

    let mut set = PatchSet {
        patch_size,
        source_width: w,
        source_height: h,
        patches: Vec::new(),
    };
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for y in 0..h {
        for x in 0..w {
            if border.mask.get(x, y) {
                let (x0, y0, x1, y1) = bounds.unwrap_or((x, y, x, y));
                bounds = Some((x0.min(x), y0.min(y), x1.max(x), y1.max(y)));
            }
        }
    }
    let Some((min_x, min_y, max_x, max_y)) = bounds else {
        return Ok(set);
    };

    let mut anchors = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut y0 = min_y;
    loop {
        let py = y0.min(h - patch_size);
        let mut x0 = min_x;
        loop {
            let px = x0.min(w - patch_size);
            if seen.insert((px, py)) {
                anchors.push((px, py));
            }
            if x0 + stride > max_x {
                break;
            }
            x0 += stride;
        }
        if y0 + stride > max_y {
            break;
        }
        y0 += stride;
    }

    for (px, py) in anchors {
        let mut hit = false;
        'scan: for y in py..py + patch_size {
            for x in px..px + patch_size {
                if border.mask.get(x, y) {
                    hit = true;
                    break 'scan;
                }
            }
        }
        if hit {
            set.patches.push(Patch {
                x: px,
                y: py,
                raster: crop(img, px, py, patch_size),
            });
        }
    }
    Ok(set)
}

/// Non-overlapping tiling: [`extract_border_patches_with_stride`] with
/// stride equal to the patch size.
pub fn extract_border_patches<R: Raster>(
    img: &R,
    border: &BorderMap,
    patch_size: usize,
) -> Result<PatchSet<R>, PipelineError> {
    extract_border_patches_with_stride(img, border, patch_size, patch_size)
}

/// Copy each patch back over the base at its recorded position. Later
/// patches win where they overlap.
pub fn stitch_patches<R: Raster>(base: &R, patches: &PatchSet<R>) -> Result<R, PipelineError> {
    let (w, h, c) = (base.width(), base.height(), base.channels());
    if patches.source_width != w || patches.source_height != h {
        return Err(PipelineError::PatchSourceMismatch {
            set_w: patches.source_width,
            set_h: patches.source_height,
            base_w: w,
            base_h: h,
        });
    }
    let size = patches.patch_size;
    let mut data = base.samples().to_vec();
    for patch in &patches.patches {
        if patch.x + size > w || patch.y + size > h {
            return Err(PipelineError::PatchOutOfBounds {
                x: patch.x,
                y: patch.y,
                size,
                width: w,
                height: h,
            });
        }
        let src = patch.raster.samples();
        for row in 0..size {
            let dst_base = ((patch.y + row) * w + patch.x) * c;
            let src_base = row * size * c;
            data[dst_base..dst_base + size * c]
                .copy_from_slice(&src[src_base..src_base + size * c]);
        }
    }
    Ok(R::from_samples(w, h, c, data).expect("stitch yields valid raster"))
}
