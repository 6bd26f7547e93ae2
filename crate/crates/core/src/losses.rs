//! Training-loss suite: masked L1 kernels over matte regions, a
//! feature-space perceptual distance, a dual alpha/foreground form,
//! and the weighted aggregate that combines them.
//!
//! Masked losses report sum, pixel count, and mean. The aggregate
//! weighs means so coefficients stay resolution independent; sums are
//! kept so region partitions stay checkable.

use thiserror::Error;

use crate::compose::{self, ComposeError};
use crate::imagecore::{AlphaMatte, BinaryMask, Raster, RgbImage};
use crate::morphology::BorderMap;

/// Number of feature levels in a [`FeatureStack`].
pub const FEATURE_LEVEL_COUNT: usize = 5;

/// Pooling strides of the stub extractor's levels.
pub const STUB_STRIDES: [usize; FEATURE_LEVEL_COUNT] = [1, 2, 4, 8, 16];

/// Minimum input width/height accepted by [`stub_feature_extractor`].
pub const STUB_MIN_DIM: usize = 16;

/// Half of one 8-bit quantization step. Alpha references usually come
/// from 8-bit files, so exact float comparison against 0 and 1 is
/// fragile; this tolerance absorbs the rounding.
pub const DEFAULT_BINARY_EPS: f32 = 0.5 / 255.0;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("{what}: expected {expected_w}x{expected_h}, got {actual_w}x{actual_h}")]
    DimensionMismatch {
        what: &'static str,
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("feature map of {width}x{height}x{channels} needs {} samples, got {actual}", width * height * channels)]
    FeatureShape {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("feature sample at index {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("feature stack needs exactly {expected} levels, got {actual}")]
    LevelCount { expected: usize, actual: usize },
    #[error("feature level {level}: shape {expected:?} vs {actual:?}")]
    LevelShapeMismatch {
        level: usize,
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("feature level {level}: weight {expected} vs {actual}")]
    WeightMismatch {
        level: usize,
        expected: f32,
        actual: f32,
    },
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("coefficient {name} must be >= 0, got {value}")]
    NegativeCoefficient { name: &'static str, value: f64 },
    #[error("image {width}x{height} is smaller than the {min}x{min} extractor minimum")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

/// Weights applied to the four auxiliary terms of the aggregate loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub lambda_per: f64,
    pub beta_alpha: f64,
    pub gamma_border: f64,
    pub theta_ac: f64,
}

impl Default for LossCoefficients {
    fn default() -> Self {
        Self {
            lambda_per: 10.0,
            beta_alpha: 25.0,
            gamma_border: 50.0,
            theta_ac: 25.0,
        }
    }
}

impl LossCoefficients {
    fn validate(&self) -> Result<(), LossError> {
        for (name, value) in [
            ("lambda_per", self.lambda_per),
            ("beta_alpha", self.beta_alpha),
            ("gamma_border", self.gamma_border),
            ("theta_ac", self.theta_ac),
        ] {
            if !value.is_finite() {
                return Err(LossError::NonFinite {
                    what: "loss coefficient",
                    value,
                });
            }
            if value < 0.0 {
                return Err(LossError::NegativeCoefficient { name, value });
            }
        }
        Ok(())
    }
}

/// Raw term values entering the aggregate. `cgan` is supplied by the
/// caller; the other four are means from the loss functions here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cgan: f64,
    pub perceptual: f64,
    pub alpha: f64,
    pub border: f64,
    pub alpha_coeff: f64,
}

/// Masked L1 outcome. `mean` is `sum / count`, defined as 0 for an
/// empty mask so aggregation never divides by zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedL1Result {
    pub sum: f64,
    pub count: usize,
    pub mean: f64,
}

impl MaskedL1Result {
    fn from_sum(sum: f64, count: usize) -> Self {
        let mean = if count == 0 { 0.0 } else { sum / count as f64 };
        Self { sum, count, mean }
    }
}

/// One feature raster. Values are unbounded, unlike image samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, LossError> {
        if data.len() != width * height * channels || data.is_empty() {
            return Err(LossError::FeatureShape {
                width,
                height,
                channels,
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(LossError::NonFiniteSample { index });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Ordered feature maps with one weight per level.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    levels: Vec<FeatureMap>,
    level_weights: Vec<f32>,
}

impl FeatureStack {
    pub fn new(levels: Vec<FeatureMap>, level_weights: Vec<f32>) -> Result<Self, LossError> {
        if levels.len() != FEATURE_LEVEL_COUNT {
            return Err(LossError::LevelCount {
                expected: FEATURE_LEVEL_COUNT,
                actual: levels.len(),
            });
        }
        if level_weights.len() != FEATURE_LEVEL_COUNT {
            return Err(LossError::LevelCount {
                expected: FEATURE_LEVEL_COUNT,
                actual: level_weights.len(),
            });
        }
        for (i, &w) in level_weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(LossError::NonFinite {
                    what: "level weight",
                    value: w as f64,
                });
            }
            if w < 0.0 {
                return Err(LossError::NegativeCoefficient {
                    name: "level weight",
                    value: w as f64,
                });
            }
            let _ = i;
        }
        Ok(Self {
            levels,
            level_weights,
        })
    }

    pub fn levels(&self) -> &[FeatureMap] {
        &self.levels
    }

    pub fn level_weights(&self) -> &[f32] {
        &self.level_weights
    }
}

/// Deterministic mapping from an image to a feature stack.
pub trait FeatureExtractor {
    fn extract(&self, img: &RgbImage) -> Result<FeatureStack, LossError>;
}

/// Extractor backed by [`stub_feature_extractor`].
#[derive(Debug, Clone, Copy, Default)]
pub struct StubFeatureExtractor;

impl FeatureExtractor for StubFeatureExtractor {
    fn extract(&self, img: &RgbImage) -> Result<FeatureStack, LossError> {
        stub_feature_extractor(img)
    }
}

fn check_same_dims<A: Raster, B: Raster>(
    a: &A,
    b: &B,
    what: &'static str,
) -> Result<(), LossError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(LossError::DimensionMismatch {
            what,
            expected_w: a.width(),
            expected_h: a.height(),
            actual_w: b.width(),
            actual_h: b.height(),
        });
    }
    Ok(())
}

/// Sum and mean of `|pred - gt|` over mask-true pixels. For
/// multichannel rasters every channel of a masked pixel contributes,
/// so `count` is true pixels times channels.
pub fn masked_l1<R: Raster>(
    pred: &R,
    gt: &R,
    mask: &BinaryMask,
) -> Result<MaskedL1Result, LossError> {
    check_same_dims(pred, gt, "pred vs gt")?;
    if mask.width() != pred.width() || mask.height() != pred.height() {
        return Err(LossError::DimensionMismatch {
            what: "mask vs pred",
            expected_w: pred.width(),
            expected_h: pred.height(),
            actual_w: mask.width(),
            actual_h: mask.height(),
        });
    }
    let channels = pred.channels();
    let p = pred.samples();
    let g = gt.samples();
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (i, &keep) in mask.data().iter().enumerate() {
        if !keep {
            continue;
        }
        let base = i * channels;
        for c in 0..channels {
            sum += (p[base + c] as f64 - g[base + c] as f64).abs();
        }
        count += channels;
    }
    Ok(MaskedL1Result::from_sum(sum, count))
}

fn binary_region_mask(gt: &AlphaMatte, eps: f32, interior: bool) -> BinaryMask {
    let data = gt
        .samples()
        .iter()
        .map(|&a| {
            let extreme = a <= eps || a >= 1.0 - eps;
            if interior {
                !extreme
            } else {
                extreme
            }
        })
        .collect();
    BinaryMask::new(gt.plane().width(), gt.plane().height(), data).unwrap()
}

/// L1 restricted to pixels whose reference alpha is (near-)0 or 1.
///
/// `eps` must lie in [0, 0.5).
pub fn alpha_loss(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    eps: f32,
) -> Result<MaskedL1Result, LossError> {
    assert!((0.0..0.5).contains(&eps), "eps must be in [0, 0.5)");
    check_same_dims(pred, gt, "pred vs gt")?;
    masked_l1(pred, gt, &binary_region_mask(gt, eps, false))
}

/// L1 restricted to pixels whose reference alpha is strictly between
/// 0 and 1: the complement of the [`alpha_loss`] region.
///
/// `eps` must lie in [0, 0.5).
pub fn alpha_coefficient_loss(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    eps: f32,
) -> Result<MaskedL1Result, LossError> {
    assert!((0.0..0.5).contains(&eps), "eps must be in [0, 0.5)");
    check_same_dims(pred, gt, "pred vs gt")?;
    masked_l1(pred, gt, &binary_region_mask(gt, eps, true))
}

/// L1 restricted to the border ring of a segmentation.
pub fn border_loss(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    border: &BorderMap,
) -> Result<MaskedL1Result, LossError> {
    masked_l1(pred, gt, &border.mask)
}

/// Weighted sum of per-level mean L1 distances between two stacks.
/// Both stacks must agree level by level in shape and weight.
pub fn perceptual_loss(pred_feats: &FeatureStack, gt_feats: &FeatureStack) -> Result<f64, LossError> {
    for (level, (pw, gw)) in pred_feats
        .level_weights
        .iter()
        .zip(&gt_feats.level_weights)
        .enumerate()
    {
        if pw != gw {
            return Err(LossError::WeightMismatch {
                level,
                expected: *pw,
                actual: *gw,
            });
        }
    }
    let mut total = 0.0f64;
    for (level, (p, g)) in pred_feats.levels.iter().zip(&gt_feats.levels).enumerate() {
        if p.shape() != g.shape() {
            return Err(LossError::LevelShapeMismatch {
                level,
                expected: p.shape(),
                actual: g.shape(),
            });
        }
        let sum: f64 = p
            .data
            .iter()
            .zip(&g.data)
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum();
        total += pred_feats.level_weights[level] as f64 * (sum / p.data.len() as f64);
    }
    Ok(total)
}

/// Pixel-membership rule a [`dual_loss`] evaluation applies in both
/// the alpha and the foreground domain. The mask always derives from
/// the reference matte.
#[derive(Debug, Clone)]
pub enum DualKernel {
    /// Every pixel counts.
    Full,
    /// Pixels whose reference alpha is (near-)0 or 1.
    AlphaExtremes { eps: f32 },
    /// Pixels whose reference alpha is strictly interior.
    AlphaInterior { eps: f32 },
    /// A precomputed border ring.
    Border(BorderMap),
}

impl DualKernel {
    fn mask_for(&self, gt: &AlphaMatte) -> BinaryMask {
        let (w, h) = (gt.plane().width(), gt.plane().height());
        match self {
            DualKernel::Full => BinaryMask::splat(w, h, true).unwrap(),
            DualKernel::AlphaExtremes { eps } => binary_region_mask(gt, *eps, false),
            DualKernel::AlphaInterior { eps } => binary_region_mask(gt, *eps, true),
            DualKernel::Border(border) => border.mask.clone(),
        }
    }
}

/// Sum of the kernel's mean applied to the matte pair and to the
/// foreground pair obtained by scaling the image with each matte.
pub fn dual_loss(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    img: &RgbImage,
    kernel: &DualKernel,
) -> Result<f64, LossError> {
    check_same_dims(pred, gt, "pred vs gt")?;
    check_same_dims(img, gt, "img vs gt")?;
    let mask = kernel.mask_for(gt);
    let alpha_term = masked_l1(pred, gt, &mask)?.mean;
    let fg_pred = compose::extract_foreground(img, pred)?;
    let fg_gt = compose::extract_foreground(img, gt)?;
    let fg_term = masked_l1(&fg_pred, &fg_gt, &mask)?.mean;
    Ok(alpha_term + fg_term)
}

/// Aggregate training loss:
/// `cgan + lambda*perceptual + beta*alpha + gamma*border + theta*alpha_coeff`.
pub fn total_loss(breakdown: &LossBreakdown, coeffs: &LossCoefficients) -> Result<f64, LossError> {
    coeffs.validate()?;
    for (what, value) in [
        ("cgan term", breakdown.cgan),
        ("perceptual term", breakdown.perceptual),
        ("alpha term", breakdown.alpha),
        ("border term", breakdown.border),
        ("alpha_coeff term", breakdown.alpha_coeff),
    ] {
        if !value.is_finite() {
            return Err(LossError::NonFinite { what, value });
        }
    }
    Ok(breakdown.cgan
        + coeffs.lambda_per * breakdown.perceptual
        + coeffs.beta_alpha * breakdown.alpha
        + coeffs.gamma_border * breakdown.border
        + coeffs.theta_ac * breakdown.alpha_coeff)
}

fn average_pool(img: &RgbImage, stride: usize) -> FeatureMap {
    let (w, h) = (img.width(), img.height());
    let out_w = w.div_ceil(stride);
    let out_h = h.div_ceil(stride);
    let samples = img.samples();
    let mut data = Vec::with_capacity(out_w * out_h * 3);
    for by in 0..out_h {
        for bx in 0..out_w {
            let x0 = bx * stride;
            let y0 = by * stride;
            let x1 = (x0 + stride).min(w);
            let y1 = (y0 + stride).min(h);
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            for c in 0..3 {
                let mut acc = 0.0f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        acc += samples[(y * w + x) * 3 + c] as f64;
                    }
                }
                data.push((acc / n) as f32);
            }
        }
    }
    FeatureMap::new(out_w, out_h, 3, data).unwrap()
}

/// Deterministic stand-in for a learned feature extractor: channelwise
/// average-pool pyramids at strides 1, 2, 4, 8, 16 with uniform level
/// weights. Rejects images smaller than 16x16.
pub fn stub_feature_extractor(img: &RgbImage) -> Result<FeatureStack, LossError> {
    if img.width() < STUB_MIN_DIM || img.height() < STUB_MIN_DIM {
        return Err(LossError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: STUB_MIN_DIM,
        });
    }
    let levels = STUB_STRIDES
        .iter()
        .map(|&s| average_pool(img, s))
        .collect();
    let weights = vec![1.0 / FEATURE_LEVEL_COUNT as f32; FEATURE_LEVEL_COUNT];
    FeatureStack::new(levels, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::ImagePlane;
    use crate::morphology::{border_map, StructuringElement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(w: usize, h: usize, data: Vec<f32>) -> ImagePlane {
        ImagePlane::new(w, h, data).unwrap()
    }

    fn matte(w: usize, h: usize, data: Vec<f32>) -> AlphaMatte {
        AlphaMatte::from_values(w, h, data).unwrap()
    }

    fn random_matte(rng: &mut ChaCha8Rng, w: usize, h: usize) -> AlphaMatte {
        let data = (0..w * h).map(|_| rng.random_range(0.0..=1.0f32)).collect();
        AlphaMatte::from_values(w, h, data).unwrap()
    }

    #[test]
    fn masked_l1_identity_and_empty_mask() {
        let a = plane(2, 2, vec![0.1, 0.5, 0.9, 0.3]);
        let all = BinaryMask::splat(2, 2, true).unwrap();
        let r = masked_l1(&a, &a, &all).unwrap();
        assert_eq!((r.sum, r.count, r.mean), (0.0, 4, 0.0));

        let b = plane(2, 2, vec![0.9, 0.1, 0.2, 0.8]);
        let none = BinaryMask::splat(2, 2, false).unwrap();
        let r = masked_l1(&a, &b, &none).unwrap();
        assert_eq!((r.sum, r.count, r.mean), (0.0, 0, 0.0));
    }

    #[test]
    fn masked_l1_hand_case() {
        let pred = plane(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let gt = plane(2, 2, vec![1.0, 1.0, 0.0, 0.0]);
        let all = BinaryMask::splat(2, 2, true).unwrap();
        let r = masked_l1(&pred, &gt, &all).unwrap();
        assert_eq!(r.sum, 2.0);
        assert_eq!(r.count, 4);
        assert_eq!(r.mean, 0.5);
    }

    #[test]
    fn masked_l1_rgb_counts_channels() {
        let pred = RgbImage::new(2, 1, vec![0.0; 6]).unwrap();
        let gt = RgbImage::new(2, 1, vec![0.5; 6]).unwrap();
        let mut mask = BinaryMask::splat(2, 1, false).unwrap();
        mask.set(0, 0, true);
        let r = masked_l1(&pred, &gt, &mask).unwrap();
        assert_eq!(r.count, 3);
        assert!((r.sum - 1.5).abs() < 1e-6);
        assert!((r.mean - 0.5).abs() < 1e-6);
    }

    #[test]
    fn masked_l1_symmetry_and_mean_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let a = random_matte(&mut rng, 6, 5);
            let b = random_matte(&mut rng, 6, 5);
            let mask_data = (0..30).map(|_| rng.random_bool(0.5)).collect();
            let mask = BinaryMask::new(6, 5, mask_data).unwrap();
            let ab = masked_l1(&a, &b, &mask).unwrap();
            let ba = masked_l1(&b, &a, &mask).unwrap();
            assert_eq!(ab.sum, ba.sum);
            if ab.count > 0 {
                assert!((ab.mean * ab.count as f64 - ab.sum).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn masked_l1_dimension_mismatch() {
        let a = plane(2, 2, vec![0.0; 4]);
        let b = plane(2, 3, vec![0.0; 6]);
        let mask = BinaryMask::splat(2, 2, true).unwrap();
        assert!(matches!(
            masked_l1(&a, &b, &mask),
            Err(LossError::DimensionMismatch { .. })
        ));
        let c = plane(2, 2, vec![0.0; 4]);
        let small = BinaryMask::splat(1, 2, true).unwrap();
        assert!(matches!(
            masked_l1(&a, &c, &small),
            Err(LossError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn alpha_loss_no_binary_pixels_is_zero() {
        let gt = matte(3, 3, vec![0.5; 9]);
        let pred = matte(3, 3, vec![0.9; 9]);
        let r = alpha_loss(&pred, &gt, DEFAULT_BINARY_EPS).unwrap();
        assert_eq!((r.sum, r.count, r.mean), (0.0, 0, 0.0));
    }

    #[test]
    fn alpha_loss_hand_case() {
        let gt = matte(2, 1, vec![0.0, 1.0]);
        let pred = matte(2, 1, vec![0.2, 0.9]);
        let r = alpha_loss(&pred, &gt, DEFAULT_BINARY_EPS).unwrap();
        assert!((r.sum - 0.3).abs() < 1e-6, "sum {}", r.sum);
        assert!((r.mean - 0.15).abs() < 1e-6);
        assert_eq!(r.count, 2);

        let identity = alpha_loss(&gt, &gt, DEFAULT_BINARY_EPS).unwrap();
        assert_eq!(identity.sum, 0.0);
    }

    #[test]
    fn alpha_coefficient_loss_hand_case() {
        let gt = matte(2, 1, vec![0.5, 0.25]);
        let pred = matte(2, 1, vec![0.75, 0.25]);
        let r = alpha_coefficient_loss(&pred, &gt, DEFAULT_BINARY_EPS).unwrap();
        assert!((r.sum - 0.25).abs() < 1e-6);
        assert_eq!(r.count, 2);

        let binary_gt = matte(2, 1, vec![0.0, 1.0]);
        let r = alpha_coefficient_loss(&pred, &binary_gt, DEFAULT_BINARY_EPS).unwrap();
        assert_eq!((r.sum, r.count), (0.0, 0));

        let half = matte(2, 1, vec![0.5, 0.5]);
        let r = alpha_coefficient_loss(&half, &half, DEFAULT_BINARY_EPS).unwrap();
        assert_eq!(r.sum, 0.0);
        assert_eq!(r.count, 2);
    }

    #[test]
    fn alpha_losses_partition_full_l1() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let pred = random_matte(&mut rng, 8, 8);
            let gt = random_matte(&mut rng, 8, 8);
            let eps = rng.random_range(0.0..0.4f32);
            let extremes = alpha_loss(&pred, &gt, eps).unwrap();
            let interior = alpha_coefficient_loss(&pred, &gt, eps).unwrap();
            let all = BinaryMask::splat(8, 8, true).unwrap();
            let full = masked_l1(&pred, &gt, &all).unwrap();
            assert!((extremes.sum + interior.sum - full.sum).abs() < 1e-6);
            assert_eq!(extremes.count + interior.count, 64);
        }
    }

    #[test]
    fn border_loss_hand_case_and_ring_locality() {
        // 3x3 block centered in 5x5; radius-1 square SE gives a
        // 24-pixel ring (everything except the center).
        let seg_data: Vec<bool> = (0..25)
            .map(|i| {
                let (x, y) = (i % 5, i / 5);
                (1..4).contains(&x) && (1..4).contains(&y)
            })
            .collect();
        let seg = BinaryMask::new(5, 5, seg_data).unwrap();
        let border = border_map(&seg, &StructuringElement::square(1));
        assert_eq!(border.mask.count_true(), 24);

        let gt = matte(5, 5, vec![0.5; 25]);
        let pred = matte(5, 5, vec![0.6; 25]);
        let r = border_loss(&pred, &gt, &border).unwrap();
        assert!((r.sum - 2.4).abs() < 1e-5, "sum {}", r.sum);
        assert_eq!(r.count, 24);

        // Only the ring matters: perturb the one non-ring pixel.
        let mut off_ring = vec![0.6f32; 25];
        off_ring[2 * 5 + 2] = 0.0;
        let pred2 = matte(5, 5, off_ring);
        let r2 = border_loss(&pred2, &gt, &border).unwrap();
        assert_eq!(r.sum, r2.sum);

        let identity = border_loss(&gt, &gt, &border).unwrap();
        assert_eq!(identity.sum, 0.0);
    }

    #[test]
    fn border_loss_empty_border_is_zero() {
        let seg = BinaryMask::splat(4, 4, false).unwrap();
        let border = border_map(&seg, &StructuringElement::square(1));
        let gt = matte(4, 4, vec![0.2; 16]);
        let pred = matte(4, 4, vec![0.9; 16]);
        let r = border_loss(&pred, &gt, &border).unwrap();
        assert_eq!((r.sum, r.count, r.mean), (0.0, 0, 0.0));
    }

    fn constant_stack(dims: &[(usize, usize)], value: f32, weights: Vec<f32>) -> FeatureStack {
        let levels = dims
            .iter()
            .map(|&(w, h)| FeatureMap::new(w, h, 1, vec![value; w * h]).unwrap())
            .collect();
        FeatureStack::new(levels, weights).unwrap()
    }

    #[test]
    fn perceptual_loss_identity_and_zero_weights() {
        let dims = [(8, 8), (4, 4), (2, 2), (1, 1), (1, 1)];
        let a = constant_stack(&dims, 0.3, vec![0.2; 5]);
        assert_eq!(perceptual_loss(&a, &a).unwrap(), 0.0);

        let b = constant_stack(&dims, 0.9, vec![0.0; 5]);
        let c = constant_stack(&dims, 0.1, vec![0.0; 5]);
        assert_eq!(perceptual_loss(&b, &c).unwrap(), 0.0);
    }

    #[test]
    fn perceptual_loss_weighted_sum_hand_case() {
        // Two of five levels differ by a constant 0.1; weights all 1.
        let dims = [(4, 4), (3, 3), (2, 2), (2, 1), (1, 1)];
        let base = constant_stack(&dims, 0.0, vec![1.0; 5]);
        let mut levels: Vec<FeatureMap> = base.levels().to_vec();
        for idx in [1, 3] {
            let (w, h, c) = levels[idx].shape();
            levels[idx] = FeatureMap::new(w, h, c, vec![0.1; w * h * c]).unwrap();
        }
        let shifted = FeatureStack::new(levels, vec![1.0; 5]).unwrap();
        let loss = perceptual_loss(&shifted, &base).unwrap();
        assert!((loss - 0.2).abs() < 1e-6, "loss {loss}");
    }

    #[test]
    fn perceptual_loss_mismatch_errors() {
        let a = constant_stack(&[(4, 4), (2, 2), (1, 1), (1, 1), (1, 1)], 0.0, vec![1.0; 5]);
        let b = constant_stack(&[(4, 4), (2, 2), (2, 1), (1, 1), (1, 1)], 0.0, vec![1.0; 5]);
        assert!(matches!(
            perceptual_loss(&a, &b),
            Err(LossError::LevelShapeMismatch { level: 2, .. })
        ));

        let mut weights = vec![1.0; 5];
        weights[4] = 0.5;
        let c = constant_stack(&[(4, 4), (2, 2), (1, 1), (1, 1), (1, 1)], 0.0, weights);
        assert!(matches!(
            perceptual_loss(&a, &c),
            Err(LossError::WeightMismatch { level: 4, .. })
        ));
    }

    #[test]
    fn feature_stack_wrong_level_count() {
        let levels = vec![FeatureMap::new(1, 1, 1, vec![0.0]).unwrap(); 4];
        assert!(matches!(
            FeatureStack::new(levels, vec![1.0; 4]),
            Err(LossError::LevelCount {
                expected: 5,
                actual: 4
            })
        ));
    }

    #[test]
    fn dual_loss_identity_and_black_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let gt = random_matte(&mut rng, 4, 4);
        let img_data: Vec<f32> = (0..48).map(|_| rng.random_range(0.0..=1.0f32)).collect();
        let img = RgbImage::new(4, 4, img_data).unwrap();
        let same = dual_loss(&gt, &gt, &img, &DualKernel::Full).unwrap();
        assert_eq!(same, 0.0);

        let pred = random_matte(&mut rng, 4, 4);
        let black = RgbImage::new(4, 4, vec![0.0; 48]).unwrap();
        let got = dual_loss(&pred, &gt, &black, &DualKernel::Full).unwrap();
        let all = BinaryMask::splat(4, 4, true).unwrap();
        let alpha_term = masked_l1(&pred, &gt, &all).unwrap().mean;
        assert!((got - alpha_term).abs() < 1e-12);
    }

    #[test]
    fn dual_loss_constant_white_doubles_alpha_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gt = random_matte(&mut rng, 4, 4);
        let pred = random_matte(&mut rng, 4, 4);
        let white = RgbImage::new(4, 4, vec![1.0; 48]).unwrap();
        for kernel in [
            DualKernel::Full,
            DualKernel::AlphaExtremes {
                eps: DEFAULT_BINARY_EPS,
            },
            DualKernel::AlphaInterior { eps: 0.1 },
        ] {
            let got = dual_loss(&pred, &gt, &white, &kernel).unwrap();
            let mask = kernel.mask_for(&gt);
            let alpha_term = masked_l1(&pred, &gt, &mask).unwrap().mean;
            assert!(
                (got - 2.0 * alpha_term).abs() < 1e-6,
                "kernel {kernel:?}: {got} vs {}",
                2.0 * alpha_term
            );
        }
    }

    #[test]
    fn total_loss_zero_and_unit_cases() {
        let zeros = LossBreakdown {
            cgan: 0.0,
            perceptual: 0.0,
            alpha: 0.0,
            border: 0.0,
            alpha_coeff: 0.0,
        };
        assert_eq!(total_loss(&zeros, &LossCoefficients::default()).unwrap(), 0.0);

        let ones = LossBreakdown {
            cgan: 1.0,
            perceptual: 1.0,
            alpha: 1.0,
            border: 1.0,
            alpha_coeff: 1.0,
        };
        assert_eq!(total_loss(&ones, &LossCoefficients::default()).unwrap(), 111.0);

        let no_weights = LossCoefficients {
            lambda_per: 0.0,
            beta_alpha: 0.0,
            gamma_border: 0.0,
            theta_ac: 0.0,
        };
        let breakdown = LossBreakdown {
            cgan: -3.5,
            perceptual: 2.0,
            alpha: 4.0,
            border: 8.0,
            alpha_coeff: 16.0,
        };
        assert_eq!(total_loss(&breakdown, &no_weights).unwrap(), -3.5);
    }

    #[test]
    fn total_loss_linear_in_each_component() {
        let coeffs = LossCoefficients::default();
        let base = LossBreakdown {
            cgan: 0.25,
            perceptual: 0.5,
            alpha: 0.125,
            border: 0.75,
            alpha_coeff: 0.375,
        };
        let t0 = total_loss(&base, &coeffs).unwrap();
        let delta = 0.125f64;

        let mut b = base;
        b.border += delta;
        let t1 = total_loss(&b, &coeffs).unwrap();
        assert!((t1 - t0 - coeffs.gamma_border * delta).abs() < 1e-9);

        let mut b = base;
        b.perceptual += delta;
        let t1 = total_loss(&b, &coeffs).unwrap();
        assert!((t1 - t0 - coeffs.lambda_per * delta).abs() < 1e-9);

        let mut b = base;
        b.alpha += delta;
        let t1 = total_loss(&b, &coeffs).unwrap();
        assert!((t1 - t0 - coeffs.beta_alpha * delta).abs() < 1e-9);

        let mut b = base;
        b.alpha_coeff += delta;
        let t1 = total_loss(&b, &coeffs).unwrap();
        assert!((t1 - t0 - coeffs.theta_ac * delta).abs() < 1e-9);

        let mut b = base;
        b.cgan += delta;
        let t1 = total_loss(&b, &coeffs).unwrap();
        assert!((t1 - t0 - delta).abs() < 1e-9);
    }

    #[test]
    fn total_loss_rejects_non_finite_and_negative_weights() {
        let breakdown = LossBreakdown {
            cgan: f64::NAN,
            perceptual: 0.0,
            alpha: 0.0,
            border: 0.0,
            alpha_coeff: 0.0,
        };
        assert!(matches!(
            total_loss(&breakdown, &LossCoefficients::default()),
            Err(LossError::NonFinite { .. })
        ));

        let ok = LossBreakdown {
            cgan: 0.0,
            perceptual: 0.0,
            alpha: 0.0,
            border: 0.0,
            alpha_coeff: 0.0,
        };
        let bad = LossCoefficients {
            lambda_per: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            total_loss(&ok, &bad),
            Err(LossError::NegativeCoefficient { .. })
        ));
    }

    #[test]
    fn stub_extractor_level_dims_and_weights() {
        let img = RgbImage::new(32, 32, vec![0.5; 32 * 32 * 3]).unwrap();
        let stack = stub_feature_extractor(&img).unwrap();
        let dims: Vec<(usize, usize, usize)> =
            stack.levels().iter().map(|l| l.shape()).collect();
        assert_eq!(
            dims,
            vec![(32, 32, 3), (16, 16, 3), (8, 8, 3), (4, 4, 3), (2, 2, 3)]
        );
        for &w in stack.level_weights() {
            assert_eq!(w, 0.2);
        }
    }

    #[test]
    fn stub_extractor_constant_image_and_determinism() {
        let img = RgbImage::new(17, 19, vec![0.25; 17 * 19 * 3]).unwrap();
        let stack = stub_feature_extractor(&img).unwrap();
        for level in stack.levels() {
            for &v in level.data() {
                assert!((v - 0.25).abs() < 1e-6);
            }
        }
        let again = stub_feature_extractor(&img).unwrap();
        assert_eq!(stack, again);
    }

    #[test]
    fn stub_extractor_rejects_small_images() {
        let img = RgbImage::new(15, 40, vec![0.0; 15 * 40 * 3]).unwrap();
        assert!(matches!(
            stub_feature_extractor(&img),
            Err(LossError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn stub_extractor_feeds_perceptual_loss() {
        // Shifting an image by a constant shifts every pooled level by
        // the same constant, so the perceptual loss is that constant.
        let a = RgbImage::new(16, 16, vec![0.2; 16 * 16 * 3]).unwrap();
        let b = RgbImage::new(16, 16, vec![0.45; 16 * 16 * 3]).unwrap();
        let fa = stub_feature_extractor(&a).unwrap();
        let fb = stub_feature_extractor(&b).unwrap();
        let loss = perceptual_loss(&fa, &fb).unwrap();
        assert!((loss - 0.25).abs() < 1e-6, "loss {loss}");
    }
}
