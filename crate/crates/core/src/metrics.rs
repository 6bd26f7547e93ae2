//! Matte quality metrics: MSE, MAE, SAD, a Gaussian-derivative
//! gradient error, and a connectivity error, all computed over the
//! whole image. SAD, gradient, and connectivity are reported per
//! kilopixel; the report also carries x1000-scaled MSE/MAE copies.
//!
//! The gradient and connectivity formulations follow the standard
//! matting-benchmark conventions (sigma 1.4 with exponent 2; level
//! step 0.1 with threshold 0.15), exposed as parameters.

use std::path::PathBuf;

use thiserror::Error;

use crate::imagecore::{load_alpha, AlphaMatte, BinaryMask, ImageError, Raster};

/// Default blur scale of the gradient-error derivative filters.
pub const DEFAULT_GRAD_SIGMA: f64 = 1.4;
/// Default exponent applied to gradient-difference magnitudes.
pub const DEFAULT_GRAD_Q: f64 = 2.0;
/// Default level increment of the connectivity error.
pub const DEFAULT_CONN_STEP: f32 = 0.1;
/// Default connectivity distance threshold.
pub const DEFAULT_CONN_THETA: f32 = 0.15;

/// Smallest width/height the derivative stencil accepts.
pub const MIN_GRAD_DIM: usize = 3;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{what}: expected {expected_w}x{expected_h}, got {actual_w}x{actual_h}")]
    DimensionMismatch {
        what: &'static str,
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("image {width}x{height} is smaller than the {min}x{min} derivative filter support")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// All five metrics for one pred/gt pair, plus x1000-scaled MSE/MAE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub sad: f64,
    pub grad: f64,
    pub conn: f64,
    pub mse_scaled: f64,
    pub mae_scaled: f64,
    pub pixel_count: usize,
}

/// Per-pixel component ids for a binary mask; 0 marks background.
/// Components are numbered from 1 in row-major order of their first
/// pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    component_count: u32,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn component_count(&self) -> u32 {
        self.component_count
    }

    /// Pixel counts per component, indexed by label minus one.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.component_count as usize];
        for &l in &self.labels {
            if l > 0 {
                sizes[(l - 1) as usize] += 1;
            }
        }
        sizes
    }
}

fn check_dims(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<(), MetricsError> {
    let (pw, ph) = (pred.plane().width(), pred.plane().height());
    let (gw, gh) = (gt.plane().width(), gt.plane().height());
    if (pw, ph) != (gw, gh) {
        return Err(MetricsError::DimensionMismatch {
            what: "pred vs gt",
            expected_w: pw,
            expected_h: ph,
            actual_w: gw,
            actual_h: gh,
        });
    }
    Ok(())
}

/// Mean squared difference over all pixels.
pub fn mse(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<f64, MetricsError> {
    check_dims(pred, gt)?;
    let n = pred.samples().len() as f64;
    let sum: f64 = pred
        .samples()
        .iter()
        .zip(gt.samples())
        .map(|(&p, &g)| {
            let d = p as f64 - g as f64;
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// Mean absolute difference over all pixels.
pub fn mae(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<f64, MetricsError> {
    check_dims(pred, gt)?;
    let n = pred.samples().len() as f64;
    Ok(abs_diff_sum(pred, gt) / n)
}

/// Sum of absolute differences in kilopixel units (raw sum / 1000).
pub fn sad(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<f64, MetricsError> {
    check_dims(pred, gt)?;
    Ok(abs_diff_sum(pred, gt) / 1000.0)
}

fn abs_diff_sum(pred: &AlphaMatte, gt: &AlphaMatte) -> f64 {
    pred.samples()
        .iter()
        .zip(gt.samples())
        .map(|(&p, &g)| (p as f64 - g as f64).abs())
        .sum()
}

/// Gaussian and first-derivative-of-Gaussian taps over [-r, r]. The
/// smoothing taps are normalized so their 2D outer product sums to 1;
/// the derivative taps carry the same normalization.
fn gaussian_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let r = (3.0 * sigma).ceil() as isize;
    let mut smooth = Vec::with_capacity((2 * r + 1) as usize);
    let mut deriv = Vec::with_capacity((2 * r + 1) as usize);
    for i in -r..=r {
        let x = i as f64;
        let g = (-x * x / (2.0 * sigma * sigma)).exp();
        smooth.push(g);
        deriv.push(-x / (sigma * sigma) * g);
    }
    let norm: f64 = smooth.iter().sum();
    for v in &mut smooth {
        *v /= norm;
    }
    for v in &mut deriv {
        *v /= norm;
    }
    (smooth, deriv)
}

/// 1D convolution along rows with edge-clamp padding.
fn convolve_rows(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        let row = y * w;
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = (x + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += src[row + sx] * kv;
            }
            out[row + x as usize] = acc;
        }
    }
    out
}

/// 1D convolution along columns with edge-clamp padding.
fn convolve_cols(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = (y + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += src[sy as usize * w + x] * kv;
            }
            out[y as usize * w + x] = acc;
        }
    }
    out
}

fn gradients(matte: &AlphaMatte, smooth: &[f64], deriv: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (matte.plane().width(), matte.plane().height());
    let src: Vec<f64> = matte.samples().iter().map(|&v| v as f64).collect();
    let dx = convolve_cols(&convolve_rows(&src, w, h, deriv), w, h, smooth);
    let dy = convolve_cols(&convolve_rows(&src, w, h, smooth), w, h, deriv);
    (dx, dy)
}

/// Sum over pixels of the gradient-difference magnitude raised to `q`,
/// in kilopixel units. Gradients come from first-derivative-of-Gaussian
/// filters with edge-clamp padding, so constant mattes have zero
/// gradient everywhere.
///
/// `sigma` must be positive.
pub fn gradient_error(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    sigma: f64,
    q: f64,
) -> Result<f64, MetricsError> {
    assert!(sigma > 0.0, "sigma must be positive");
    check_dims(pred, gt)?;
    let (w, h) = (pred.plane().width(), pred.plane().height());
    if w < MIN_GRAD_DIM || h < MIN_GRAD_DIM {
        return Err(MetricsError::ImageTooSmall {
            width: w,
            height: h,
            min: MIN_GRAD_DIM,
        });
    }
    let (smooth, deriv) = gaussian_kernels(sigma);
    let (pdx, pdy) = gradients(pred, &smooth, &deriv);
    let (gdx, gdy) = gradients(gt, &smooth, &deriv);
    let mut sum = 0.0f64;
    for i in 0..pdx.len() {
        let ddx = pdx[i] - gdx[i];
        let ddy = pdy[i] - gdy[i];
        let norm_sq = ddx * ddx + ddy * ddy;
        sum += if (q - 2.0).abs() < 1e-12 {
            norm_sq
        } else {
            norm_sq.powf(q / 2.0)
        };
    }
    Ok(sum / 1000.0)
}

/// Label 4-connected components of true pixels. Labels start at 1 and
/// follow the row-major order of each component's first pixel.
pub fn connected_components(mask: &BinaryMask) -> LabelMap {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask.data()[j] && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }
    LabelMap {
        width: w,
        height: h,
        labels,
        component_count: next,
    }
}

/// Membership mask of the largest component, ties broken by the lowest
/// label (earliest row-major first pixel). All-false when the mask has
/// no components.
fn largest_component(mask: &BinaryMask) -> Vec<bool> {
    let map = connected_components(mask);
    if map.component_count == 0 {
        return vec![false; mask.data().len()];
    }
    let sizes = map.component_sizes();
    let mut best = 0usize;
    for (i, &s) in sizes.iter().enumerate() {
        if s > sizes[best] {
            best = i;
        }
    }
    let target = (best + 1) as u32;
    map.labels.iter().map(|&l| l == target).collect()
}

/// Connectivity error in kilopixel units.
///
/// For each level l in {0, step, 2*step, ..., 1} both mattes are
/// thresholded at l and the largest 4-connected component of their
/// intersection forms the connected region. Each pixel records the
/// last level at which it still belonged to that region; the deviation
/// of a matte value from that level, when at least `theta`, reduces
/// the pixel's connectivity degree. The error sums the absolute degree
/// differences between pred and gt.
///
/// `step` must lie strictly inside (0, 1).
pub fn connectivity_error(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    step: f32,
    theta: f32,
) -> Result<f64, MetricsError> {
    assert!(step > 0.0 && step < 1.0, "step must be in (0, 1)");
    check_dims(pred, gt)?;
    let (w, h) = (pred.plane().width(), pred.plane().height());
    let n = w * h;

    let mut levels: Vec<f32> = Vec::new();
    let mut k = 0u32;
    loop {
        let l = k as f32 * step;
        if l >= 1.0 {
            break;
        }
        levels.push(l);
        k += 1;
    }
    levels.push(1.0);

    let mut l_map = vec![-1.0f32; n];
    for i in 1..levels.len() {
        let level = levels[i];
        let inter: Vec<bool> = pred
            .samples()
            .iter()
            .zip(gt.samples())
            .map(|(&p, &g)| p >= level && g >= level)
            .collect();
        let inter = BinaryMask::new(w, h, inter).unwrap();
        let omega = largest_component(&inter);
        for j in 0..n {
            if l_map[j] < 0.0 && !omega[j] {
                l_map[j] = levels[i - 1];
            }
        }
    }
    for v in &mut l_map {
        if *v < 0.0 {
            *v = 1.0;
        }
    }

    let mut sum = 0.0f64;
    for j in 0..n {
        let phi = |a: f32| -> f64 {
            let d = a - l_map[j];
            if d >= theta {
                1.0 - d as f64
            } else {
                1.0
            }
        };
        sum += (phi(pred.samples()[j]) - phi(gt.samples()[j])).abs();
    }
    Ok(sum / 1000.0)
}

/// All five metrics with default parameters.
pub fn evaluate_pair(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<MetricsReport, MetricsError> {
    let mse = mse(pred, gt)?;
    let mae = mae(pred, gt)?;
    let sad = sad(pred, gt)?;
    let grad = gradient_error(pred, gt, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q)?;
    let conn = connectivity_error(pred, gt, DEFAULT_CONN_STEP, DEFAULT_CONN_THETA)?;
    Ok(MetricsReport {
        mse,
        mae,
        sad,
        grad,
        conn,
        mse_scaled: 1000.0 * mse,
        mae_scaled: 1000.0 * mae,
        pixel_count: pred.samples().len(),
    })
}

/// One manifest entry: a prediction path and its reference path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub pred: PathBuf,
    pub gt: PathBuf,
}

/// Result of evaluating one manifest entry.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub record: PairRecord,
    pub result: Result<MetricsReport, String>,
}

/// Per-pair outcomes in manifest order plus the unweighted mean over
/// the successful pairs.
#[derive(Debug, Clone)]
pub struct DatasetEvaluation {
    pub outcomes: Vec<PairOutcome>,
    pub aggregate: Option<MetricsReport>,
    pub failures: usize,
}

fn evaluate_record(record: &PairRecord) -> Result<MetricsReport, String> {
    let pred = load_alpha(&record.pred).map_err(|e| e.to_string())?;
    let gt = load_alpha(&record.gt).map_err(|e| e.to_string())?;
    evaluate_pair(&pred, &gt).map_err(|e| e.to_string())
}

fn mean_report(reports: &[MetricsReport]) -> Option<MetricsReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mse = reports.iter().map(|r| r.mse).sum::<f64>() / n;
    let mae = reports.iter().map(|r| r.mae).sum::<f64>() / n;
    Some(MetricsReport {
        mse,
        mae,
        sad: reports.iter().map(|r| r.sad).sum::<f64>() / n,
        grad: reports.iter().map(|r| r.grad).sum::<f64>() / n,
        conn: reports.iter().map(|r| r.conn).sum::<f64>() / n,
        mse_scaled: 1000.0 * mse,
        mae_scaled: 1000.0 * mae,
        pixel_count: reports.iter().map(|r| r.pixel_count).sum(),
    })
}

/// Evaluate every manifest entry with up to `jobs` parallel workers.
/// A failing entry is reported in place and the run continues; the
/// output order is the manifest order regardless of completion order.
/// The aggregate's pixel_count is the total over successful pairs.
pub fn evaluate_dataset(records: &[PairRecord], jobs: usize) -> DatasetEvaluation {
    let results: Vec<Result<MetricsReport, String>> = if jobs <= 1 {
        records.iter().map(evaluate_record).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("worker pool construction");
        pool.install(|| {
            use rayon::prelude::*;
            records.par_iter().map(evaluate_record).collect()
        })
    };
    let successes: Vec<MetricsReport> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failures = results.len() - successes.len();
    let outcomes = records
        .iter()
        .zip(results)
        .map(|(record, result)| PairOutcome {
            record: record.clone(),
            result,
        })
        .collect();
    DatasetEvaluation {
        outcomes,
        aggregate: mean_report(&successes),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{save_image, BitDepth};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matte(w: usize, h: usize, data: Vec<f32>) -> AlphaMatte {
        AlphaMatte::from_values(w, h, data).unwrap()
    }

    fn random_matte(rng: &mut ChaCha8Rng, w: usize, h: usize) -> AlphaMatte {
        let data = (0..w * h).map(|_| rng.random_range(0.0..=1.0f32)).collect();
        AlphaMatte::from_values(w, h, data).unwrap()
    }

    #[test]
    fn mse_identity_offset_and_maximal() {
        let gt = matte(4, 3, vec![0.3; 12]);
        assert_eq!(mse(&gt, &gt).unwrap(), 0.0);

        let pred = matte(4, 3, vec![0.4; 12]);
        assert!((mse(&pred, &gt).unwrap() - 0.01).abs() < 1e-6);

        let zeros = matte(2, 2, vec![0.0; 4]);
        let ones = matte(2, 2, vec![1.0; 4]);
        assert_eq!(mse(&ones, &zeros).unwrap(), 1.0);
    }

    #[test]
    fn mae_and_sad_offset_case() {
        let gt = matte(4, 3, vec![0.25; 12]);
        let pred = matte(4, 3, vec![0.35; 12]);
        assert!((mae(&pred, &gt).unwrap() - 0.1).abs() < 1e-6);
        assert!((sad(&pred, &gt).unwrap() - 0.1 * 12.0 / 1000.0).abs() < 1e-9);
        assert_eq!(mae(&gt, &gt).unwrap(), 0.0);
        assert_eq!(sad(&gt, &gt).unwrap(), 0.0);
    }

    #[test]
    fn pointwise_metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_matte(&mut rng, 6, 7);
            let b = random_matte(&mut rng, 6, 7);
            let mse_ab = mse(&a, &b).unwrap();
            let mae_ab = mae(&a, &b).unwrap();
            let sad_ab = sad(&a, &b).unwrap();
            assert_eq!(mse_ab, mse(&b, &a).unwrap());
            assert_eq!(mae_ab, mae(&b, &a).unwrap());
            assert_eq!(sad_ab, sad(&b, &a).unwrap());
            assert!(mae_ab <= 1.0);
            assert!(mse_ab <= mae_ab);
            assert!((sad_ab * 1000.0 - mae_ab * 42.0).abs() < 1e-6);
        }
    }

    #[test]
    fn metric_dimension_mismatch() {
        let a = matte(2, 2, vec![0.0; 4]);
        let b = matte(2, 3, vec![0.0; 6]);
        assert!(matches!(
            mse(&a, &b),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_identity_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matte(&mut rng, 16, 16);
        assert_eq!(
            gradient_error(&a, &a, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q).unwrap(),
            0.0
        );

        let c1 = matte(16, 16, vec![0.7; 256]);
        let c2 = matte(16, 16, vec![0.2; 256]);
        let g = gradient_error(&c1, &c2, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q).unwrap();
        assert!(g < 1e-12, "constants should have zero gradients, got {g}");
    }

    // Direct 2D convolution with the full outer-product kernels,
    // including the same edge-clamp rule.
    fn dense_gradients(matte: &AlphaMatte, sigma: f64) -> (Vec<f64>, Vec<f64>) {
        let (w, h) = (matte.plane().width(), matte.plane().height());
        let r = (3.0 * sigma).ceil() as isize;
        let taps: Vec<f64> = (-r..=r)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = taps.iter().sum();
        let smooth: Vec<f64> = taps.iter().map(|t| t / norm).collect();
        let deriv: Vec<f64> = (-r..=r)
            .zip(&taps)
            .map(|(i, t)| -(i as f64) / (sigma * sigma) * t / norm)
            .collect();
        let mut dx = vec![0.0; w * h];
        let mut dy = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut ax = 0.0;
                let mut ay = 0.0;
                for ky in -r..=r {
                    for kx in -r..=r {
                        let sx = (x + kx).clamp(0, w as isize - 1) as usize;
                        let sy = (y + ky).clamp(0, h as isize - 1) as usize;
                        let v = matte.samples()[sy * w + sx] as f64;
                        ax += v * deriv[(kx + r) as usize] * smooth[(ky + r) as usize];
                        ay += v * smooth[(kx + r) as usize] * deriv[(ky + r) as usize];
                    }
                }
                dx[(y as usize) * w + x as usize] = ax;
                dy[(y as usize) * w + x as usize] = ay;
            }
        }
        (dx, dy)
    }

    fn dense_gradient_error(pred: &AlphaMatte, gt: &AlphaMatte, sigma: f64, q: f64) -> f64 {
        let (pdx, pdy) = dense_gradients(pred, sigma);
        let (gdx, gdy) = dense_gradients(gt, sigma);
        let mut sum = 0.0;
        for i in 0..pdx.len() {
            let ddx = pdx[i] - gdx[i];
            let ddy = pdy[i] - gdy[i];
            sum += (ddx * ddx + ddy * ddy).powf(q / 2.0);
        }
        sum / 1000.0
    }

    #[test]
    fn gradient_step_edge_matches_dense_convolution() {
        let data: Vec<f32> = (0..256)
            .map(|i| if i % 16 < 8 { 0.0 } else { 1.0 })
            .collect();
        let pred = matte(16, 16, data);
        let gt = matte(16, 16, vec![0.0; 256]);
        let fast = gradient_error(&pred, &gt, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q).unwrap();
        let slow = dense_gradient_error(&pred, &gt, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q);
        assert!((fast - slow).abs() < 1e-6, "fast {fast} vs dense {slow}");
        assert!(fast > 0.0);
    }

    #[test]
    fn gradient_random_matches_dense_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pred = random_matte(&mut rng, 12, 14);
        let gt = random_matte(&mut rng, 12, 14);
        for (sigma, q) in [(1.4, 2.0), (0.8, 2.0), (1.4, 1.0)] {
            let fast = gradient_error(&pred, &gt, sigma, q).unwrap();
            let slow = dense_gradient_error(&pred, &gt, sigma, q);
            assert!(
                (fast - slow).abs() < 1e-6,
                "sigma {sigma} q {q}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn gradient_constant_shift_invariance() {
        // Values are multiples of 1/64 and the shift is 0.25, so the
        // shifted samples are exact and only the filtering differs.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let base: Vec<f32> = (0..100).map(|_| rng.random_range(0..32) as f32 / 64.0).collect();
        let other: Vec<f32> = (0..100).map(|_| rng.random_range(0..32) as f32 / 64.0).collect();
        let a = matte(10, 10, base.clone());
        let b = matte(10, 10, other.clone());
        let a_shift = matte(10, 10, base.iter().map(|v| v + 0.25).collect());
        let b_shift = matte(10, 10, other.iter().map(|v| v + 0.25).collect());
        let g0 = gradient_error(&a, &b, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q).unwrap();
        let g1 = gradient_error(&a_shift, &b_shift, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q).unwrap();
        assert!((g0 - g1).abs() < 1e-6, "{g0} vs {g1}");
    }

    #[test]
    fn gradient_rejects_tiny_images() {
        let a = matte(2, 8, vec![0.0; 16]);
        assert!(matches!(
            gradient_error(&a, &a, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q),
            Err(MetricsError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn components_trivial_cases() {
        let empty = BinaryMask::splat(3, 3, false).unwrap();
        let map = connected_components(&empty);
        assert_eq!(map.component_count(), 0);
        assert!(map.labels().iter().all(|&l| l == 0));

        let full = BinaryMask::splat(3, 4, true).unwrap();
        let map = connected_components(&full);
        assert_eq!(map.component_count(), 1);
        assert!(map.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn components_diagonal_pixels_are_separate() {
        let mut mask = BinaryMask::splat(2, 2, false).unwrap();
        mask.set(0, 0, true);
        mask.set(1, 1, true);
        let map = connected_components(&mask);
        assert_eq!(map.component_count(), 2);
        assert_eq!(map.labels()[0], 1, "row-major first pixel gets label 1");
        assert_eq!(map.labels()[3], 2);
    }

    // Recursive flood fill, written independently of the scan in the
    // implementation.
    fn flood_oracle(mask: &BinaryMask) -> Vec<u32> {
        fn fill(mask: &BinaryMask, labels: &mut [u32], x: usize, y: usize, label: u32) {
            let w = mask.width();
            if !mask.get(x, y) || labels[y * w + x] != 0 {
                return;
            }
            labels[y * w + x] = label;
            if x > 0 {
                fill(mask, labels, x - 1, y, label);
            }
            if x + 1 < w {
                fill(mask, labels, x + 1, y, label);
            }
            if y > 0 {
                fill(mask, labels, x, y - 1, label);
            }
            if y + 1 < mask.height() {
                fill(mask, labels, x, y + 1, label);
            }
        }
        let mut labels = vec![0u32; mask.width() * mask.height()];
        let mut next = 0;
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if mask.get(x, y) && labels[y * mask.width() + x] == 0 {
                    next += 1;
                    fill(mask, &mut labels, x, y, next);
                }
            }
        }
        labels
    }

    #[test]
    fn components_match_flood_fill_on_all_3x3_masks() {
        for bits in 0u32..512 {
            let data: Vec<bool> = (0..9).map(|i| bits & (1 << i) != 0).collect();
            let mask = BinaryMask::new(3, 3, data).unwrap();
            let map = connected_components(&mask);
            assert_eq!(map.labels(), flood_oracle(&mask).as_slice(), "mask {bits:#011b}");
        }
    }

    #[test]
    fn connectivity_identity_and_identical_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_matte(&mut rng, 8, 8);
        assert_eq!(
            connectivity_error(&a, &a, DEFAULT_CONN_STEP, DEFAULT_CONN_THETA).unwrap(),
            0.0
        );

        let blob: Vec<f32> = (0..64)
            .map(|i| {
                let (x, y) = (i % 8, i / 8);
                if (2..6).contains(&x) && (2..6).contains(&y) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let b = matte(8, 8, blob);
        assert_eq!(
            connectivity_error(&b, &b.clone(), DEFAULT_CONN_STEP, DEFAULT_CONN_THETA).unwrap(),
            0.0
        );
    }

    #[test]
    fn connectivity_two_pixel_hand_case() {
        // Levels 0, 0.5, 1. The second pixel leaves the connected
        // region at level 1, so its recorded level is 0.5; gt deviates
        // by 0.5 there while pred deviates by 0. Error = 0.5/1000.
        let pred = matte(2, 1, vec![1.0, 0.5]);
        let gt = matte(2, 1, vec![1.0, 1.0]);
        let got = connectivity_error(&pred, &gt, 0.5, DEFAULT_CONN_THETA).unwrap();
        assert!((got - 0.0005).abs() < 1e-9, "got {got}");
    }

    // Per-level oracle built on the recursive flood fill above.
    fn connectivity_oracle(pred: &AlphaMatte, gt: &AlphaMatte, step: f32, theta: f32) -> f64 {
        let (w, h) = (pred.plane().width(), pred.plane().height());
        let mut levels = vec![0.0f32];
        let mut k = 1;
        while (k as f32) * step < 1.0 {
            levels.push(k as f32 * step);
            k += 1;
        }
        levels.push(1.0);
        let mut l_map = vec![-1.0f32; w * h];
        for i in 1..levels.len() {
            let data: Vec<bool> = pred
                .samples()
                .iter()
                .zip(gt.samples())
                .map(|(&p, &g)| p >= levels[i] && g >= levels[i])
                .collect();
            let mask = BinaryMask::new(w, h, data).unwrap();
            let labels = flood_oracle(&mask);
            let count = labels.iter().copied().max().unwrap_or(0) as usize;
            let mut omega = vec![false; w * h];
            if count > 0 {
                let mut sizes = vec![0usize; count];
                for &l in &labels {
                    if l > 0 {
                        sizes[(l - 1) as usize] += 1;
                    }
                }
                let mut best = 0;
                for (idx, &s) in sizes.iter().enumerate() {
                    if s > sizes[best] {
                        best = idx;
                    }
                }
                for (o, &l) in omega.iter_mut().zip(&labels) {
                    *o = l == (best + 1) as u32;
                }
            }
            for j in 0..w * h {
                if l_map[j] < 0.0 && !omega[j] {
                    l_map[j] = levels[i - 1];
                }
            }
        }
        let mut sum = 0.0;
        for j in 0..w * h {
            let lv = if l_map[j] < 0.0 { 1.0 } else { l_map[j] };
            let phi = |a: f32| {
                let d = a - lv;
                if d >= theta {
                    1.0 - d as f64
                } else {
                    1.0
                }
            };
            sum += (phi(pred.samples()[j]) - phi(gt.samples()[j])).abs();
        }
        sum / 1000.0
    }

    #[test]
    fn connectivity_detached_island_matches_oracle() {
        // A 4x4 blob shared by both mattes plus a detached 2x2 island
        // only the prediction contains.
        let mut pred_data = vec![0.0f32; 64];
        let mut gt_data = vec![0.0f32; 64];
        for y in 0..4 {
            for x in 0..4 {
                pred_data[y * 8 + x] = 1.0;
                gt_data[y * 8 + x] = 1.0;
            }
        }
        for y in 6..8 {
            for x in 6..8 {
                pred_data[y * 8 + x] = 1.0;
            }
        }
        let pred = matte(8, 8, pred_data);
        let gt = matte(8, 8, gt_data);
        let got = connectivity_error(&pred, &gt, DEFAULT_CONN_STEP, DEFAULT_CONN_THETA).unwrap();
        let want = connectivity_oracle(&pred, &gt, DEFAULT_CONN_STEP, DEFAULT_CONN_THETA);
        assert!((got - want).abs() < 1e-6, "got {got} want {want}");
        // The island deviates by 1.0 at 4 pixels: 4/1000.
        assert!((got - 0.004).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn connectivity_random_mattes_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let pred = random_matte(&mut rng, 9, 7);
            let gt = random_matte(&mut rng, 9, 7);
            let got =
                connectivity_error(&pred, &gt, DEFAULT_CONN_STEP, DEFAULT_CONN_THETA).unwrap();
            let want = connectivity_oracle(&pred, &gt, DEFAULT_CONN_STEP, DEFAULT_CONN_THETA);
            assert!((got - want).abs() < 1e-6, "got {got} want {want}");
        }
    }

    #[test]
    fn evaluate_pair_identity_and_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = random_matte(&mut rng, 16, 16);
        let report = evaluate_pair(&a, &a).unwrap();
        assert_eq!(
            (report.mse, report.mae, report.sad, report.grad, report.conn),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(report.pixel_count, 256);

        let pred = random_matte(&mut rng, 4, 4);
        let gt = random_matte(&mut rng, 4, 4);
        let report = evaluate_pair(&pred, &gt).unwrap();
        assert_eq!(report.mse, mse(&pred, &gt).unwrap());
        assert_eq!(report.mae, mae(&pred, &gt).unwrap());
        assert_eq!(report.sad, sad(&pred, &gt).unwrap());
        assert_eq!(
            report.grad,
            gradient_error(&pred, &gt, DEFAULT_GRAD_SIGMA, DEFAULT_GRAD_Q).unwrap()
        );
        assert_eq!(
            report.conn,
            connectivity_error(&pred, &gt, DEFAULT_CONN_STEP, DEFAULT_CONN_THETA).unwrap()
        );
        assert_eq!(report.mse_scaled, 1000.0 * report.mse);
        assert_eq!(report.mae_scaled, 1000.0 * report.mae);
        assert!(report.mse >= 0.0 && report.grad >= 0.0 && report.conn >= 0.0);
    }

    fn write_matte(dir: &std::path::Path, name: &str, matte: &AlphaMatte) -> PathBuf {
        let path = dir.join(name);
        save_image(matte, &path, BitDepth::Eight).unwrap();
        path
    }

    #[test]
    fn dataset_identical_pairs_and_means() {
        let dir = tempfile::TempDir::new().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let pred_a = random_matte(&mut rng, 8, 8);
        let gt_a = random_matte(&mut rng, 8, 8);
        let pred_b = random_matte(&mut rng, 8, 8);
        let gt_b = random_matte(&mut rng, 8, 8);
        let pa = write_matte(dir.path(), "pred_a.png", &pred_a);
        let ga = write_matte(dir.path(), "gt_a.png", &gt_a);
        let pb = write_matte(dir.path(), "pred_b.png", &pred_b);
        let gb = write_matte(dir.path(), "gt_b.png", &gt_b);

        let single = evaluate_dataset(
            &[PairRecord {
                pred: pa.clone(),
                gt: ga.clone(),
            }],
            1,
        );
        assert_eq!(single.failures, 0);
        let only = single.outcomes[0].result.as_ref().unwrap();
        let agg = single.aggregate.unwrap();
        assert_eq!(agg.mse, only.mse);
        assert_eq!(agg.conn, only.conn);

        let same_twice = evaluate_dataset(
            &[
                PairRecord {
                    pred: pa.clone(),
                    gt: ga.clone(),
                },
                PairRecord {
                    pred: pa.clone(),
                    gt: ga.clone(),
                },
            ],
            2,
        );
        let agg = same_twice.aggregate.unwrap();
        let per = same_twice.outcomes[0].result.as_ref().unwrap();
        assert!((agg.mse - per.mse).abs() < 1e-15);
        assert!((agg.grad - per.grad).abs() < 1e-15);

        let mixed = evaluate_dataset(
            &[
                PairRecord {
                    pred: pa.clone(),
                    gt: ga.clone(),
                },
                PairRecord {
                    pred: pb.clone(),
                    gt: gb.clone(),
                },
            ],
            2,
        );
        let r0 = mixed.outcomes[0].result.as_ref().unwrap();
        let r1 = mixed.outcomes[1].result.as_ref().unwrap();
        let agg = mixed.aggregate.unwrap();
        assert!((agg.mse - (r0.mse + r1.mse) / 2.0).abs() < 1e-9);
        assert!((agg.mae - (r0.mae + r1.mae) / 2.0).abs() < 1e-9);
        assert!((agg.sad - (r0.sad + r1.sad) / 2.0).abs() < 1e-9);
        assert!((agg.grad - (r0.grad + r1.grad) / 2.0).abs() < 1e-9);
        assert!((agg.conn - (r0.conn + r1.conn) / 2.0).abs() < 1e-9);
        assert_eq!(agg.mse_scaled, 1000.0 * agg.mse);
        assert_eq!(agg.pixel_count, 128);
    }

    #[test]
    fn dataset_missing_file_continues() {
        let dir = tempfile::TempDir::new().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = random_matte(&mut rng, 6, 6);
        let pa = write_matte(dir.path(), "a.png", &a);
        let records = vec![
            PairRecord {
                pred: dir.path().join("nope.png"),
                gt: pa.clone(),
            },
            PairRecord {
                pred: pa.clone(),
                gt: pa.clone(),
            },
        ];
        let eval = evaluate_dataset(&records, 1);
        assert_eq!(eval.failures, 1);
        assert!(eval.outcomes[0].result.is_err());
        let ok = eval.outcomes[1].result.as_ref().unwrap();
        assert_eq!(ok.mse, 0.0);
        assert_eq!(eval.aggregate.unwrap().mse, 0.0);
    }
}
