//! Binary erosion/dilation, border maps, and trimap synthesis.
//!
//! Both operators treat pixels beyond the image bounds as background by
//! default, which keeps subject borders that touch the image edge inside
//! the border band. [`erode_assuming`] / [`dilate_assuming`] expose the
//! out-of-bounds convention for duality checks.

use std::path::Path;

use thiserror::Error;

use crate::imagecore::{
    AlphaMatte, BinaryMask, BitDepth, ImageError, ImagePlane, LoadKind, LoadedImage, Raster,
};

#[derive(Debug, Error)]
pub enum TrimapError {
    #[error("pixel value {value} at index {index} is not a trimap label (expected 0, 128, or 255)")]
    InvalidLabel { index: usize, value: u8 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Footprint shape of a structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeShape {
    Square,
    Disk,
}

/// Neighborhood footprint for erosion and dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    pub shape: SeShape,
    pub radius: usize,
}

impl StructuringElement {
    pub fn square(radius: usize) -> Self {
        assert!(radius >= 1, "structuring element radius must be >= 1");
        Self {
            shape: SeShape::Square,
            radius,
        }
    }

    pub fn disk(radius: usize) -> Self {
        assert!(radius >= 1, "structuring element radius must be >= 1");
        Self {
            shape: SeShape::Disk,
            radius,
        }
    }

    /// Offsets covered by the footprint, centered at the origin.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let inside = match self.shape {
                    SeShape::Square => true,
                    SeShape::Disk => dx * dx + dy * dy <= r * r,
                };
                if inside {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

/// Value assumed for pixels sampled beyond the raster bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutOfBounds {
    Background,
    Foreground,
}

impl OutOfBounds {
    fn as_bool(self) -> bool {
        matches!(self, OutOfBounds::Foreground)
    }
}

/// Dilate-minus-erode ring around a segmentation boundary.
#[derive(Debug, Clone)]
pub struct BorderMap {
    pub mask: BinaryMask,
    pub source_radius: usize,
}

/// Ternary foreground / background / unknown partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimapLabel {
    Background,
    Unknown,
    Foreground,
}

impl TrimapLabel {
    pub fn to_byte(self) -> u8 {
        match self {
            TrimapLabel::Background => 0,
            TrimapLabel::Unknown => 128,
            TrimapLabel::Foreground => 255,
        }
    }

    pub fn from_byte(value: u8) -> Option<Self> {
        match value {
            0 => Some(TrimapLabel::Background),
            128 => Some(TrimapLabel::Unknown),
            255 => Some(TrimapLabel::Foreground),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trimap {
    width: usize,
    height: usize,
    labels: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn new(width: usize, height: usize, labels: Vec<TrimapLabel>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension);
        }
        if labels.len() != width * height {
            return Err(ImageError::DataLengthMismatch {
                width,
                height,
                channels: 1,
                actual: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[TrimapLabel] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> TrimapLabel {
        self.labels[y * self.width + x]
    }

    /// Counts of (background, unknown, foreground) pixels.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for label in &self.labels {
            match label {
                TrimapLabel::Background => counts.0 += 1,
                TrimapLabel::Unknown => counts.1 += 1,
                TrimapLabel::Foreground => counts.2 += 1,
            }
        }
        counts
    }

    /// Serialize as an 8-bit grayscale file with exact values {0, 128, 255}.
    pub fn save(&self, path: &Path) -> Result<(), TrimapError> {
        let plane_vals: Vec<f32> = self
            .labels
            .iter()
            .map(|l| l.to_byte() as f32 / 255.0)
            .collect();
        let plane = ImagePlane::new(self.width, self.height, plane_vals)?;
        crate::imagecore::save_image(&plane, path, BitDepth::Eight)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrimapError> {
        let LoadedImage::Gray(plane) = crate::imagecore::load_image(path, LoadKind::Gray)? else {
            unreachable!("gray load produced rgb");
        };
        let mut labels = Vec::with_capacity(plane.samples().len());
        for (index, &s) in plane.samples().iter().enumerate() {
            let byte = (s * 255.0).round() as u8;
            let label = TrimapLabel::from_byte(byte)
                .ok_or(TrimapError::InvalidLabel { index, value: byte })?;
            labels.push(label);
        }
        Ok(Self {
            width: plane.width(),
            height: plane.height(),
            labels,
        })
    }
}

fn erode_naive_assuming(mask: &BinaryMask, se: &StructuringElement, oob: OutOfBounds) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let offsets = se.offsets();
    let oob_val = oob.as_bool();
    let mut out = BinaryMask::splat(mask.width(), mask.height(), false).unwrap();
    for y in 0..h {
        for x in 0..w {
            let mut all = true;
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                let v = if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    oob_val
                } else {
                    mask.get(nx as usize, ny as usize)
                };
                if !v {
                    all = false;
                    break;
                }
            }
            out.set(x as usize, y as usize, all);
        }
    }
    out
}

fn dilate_naive_assuming(mask: &BinaryMask, se: &StructuringElement, oob: OutOfBounds) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let offsets = se.offsets();
    let oob_val = oob.as_bool();
    let mut out = BinaryMask::splat(mask.width(), mask.height(), false).unwrap();
    for y in 0..h {
        for x in 0..w {
            let mut any = false;
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                let v = if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    oob_val
                } else {
                    mask.get(nx as usize, ny as usize)
                };
                if v {
                    any = true;
                    break;
                }
            }
            out.set(x as usize, y as usize, any);
        }
    }
    out
}

/// Direct footprint-scan erosion. Reference implementation for the
/// separable fast path; O(pixels x |SE|).
pub fn erode_naive(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_naive_assuming(mask, se, OutOfBounds::Background)
}

/// Direct footprint-scan dilation. Reference implementation.
pub fn dilate_naive(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate_naive_assuming(mask, se, OutOfBounds::Background)
}

// Square footprints factor into a horizontal and a vertical segment,
// so the 2D min/max filter runs as two 1D passes.
fn erode_separable(mask: &BinaryMask, radius: usize, oob: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let r = radius as isize;
    let mut horiz = BinaryMask::splat(w, h, false).unwrap();
    for y in 0..h {
        for x in 0..w as isize {
            let mut all = true;
            for dx in -r..=r {
                let nx = x + dx;
                let v = if nx < 0 || nx >= w as isize {
                    oob
                } else {
                    mask.get(nx as usize, y)
                };
                if !v {
                    all = false;
                    break;
                }
            }
            horiz.set(x as usize, y, all);
        }
    }
    let mut out = BinaryMask::splat(w, h, false).unwrap();
    for y in 0..h as isize {
        for x in 0..w {
            let mut all = true;
            for dy in -r..=r {
                let ny = y + dy;
                let v = if ny < 0 || ny >= h as isize {
                    oob
                } else {
                    horiz.get(x, ny as usize)
                };
                if !v {
                    all = false;
                    break;
                }
            }
            out.set(x, y as usize, all);
        }
    }
    out
}

fn dilate_separable(mask: &BinaryMask, radius: usize, oob: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let r = radius as isize;
    let mut horiz = BinaryMask::splat(w, h, false).unwrap();
    for y in 0..h {
        for x in 0..w as isize {
            let mut any = false;
            for dx in -r..=r {
                let nx = x + dx;
                let v = if nx < 0 || nx >= w as isize {
                    oob
                } else {
                    mask.get(nx as usize, y)
                };
                if v {
                    any = true;
                    break;
                }
            }
            horiz.set(x as usize, y, any);
        }
    }
    let mut out = BinaryMask::splat(w, h, false).unwrap();
    for y in 0..h as isize {
        for x in 0..w {
            let mut any = false;
            for dy in -r..=r {
                let ny = y + dy;
                let v = if ny < 0 || ny >= h as isize {
                    oob
                } else {
                    horiz.get(x, ny as usize)
                };
                if v {
                    any = true;
                    break;
                }
            }
            out.set(x, y as usize, any);
        }
    }
    out
}

/// Erosion with an explicit out-of-bounds convention.
pub fn erode_assuming(mask: &BinaryMask, se: &StructuringElement, oob: OutOfBounds) -> BinaryMask {
    match se.shape {
        SeShape::Square => erode_separable(mask, se.radius, oob.as_bool()),
        SeShape::Disk => erode_naive_assuming(mask, se, oob),
    }
}

/// Dilation with an explicit out-of-bounds convention.
pub fn dilate_assuming(mask: &BinaryMask, se: &StructuringElement, oob: OutOfBounds) -> BinaryMask {
    match se.shape {
        SeShape::Square => dilate_separable(mask, se.radius, oob.as_bool()),
        SeShape::Disk => dilate_naive_assuming(mask, se, oob),
    }
}

/// Pixel stays set iff every pixel under the footprint is set
/// (out-of-bounds counts as background).
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_assuming(mask, se, OutOfBounds::Background)
}

/// Pixel becomes set iff any pixel under the footprint is set.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate_assuming(mask, se, OutOfBounds::Background)
}

/// `dilate(seg) AND NOT erode(seg)`: the ring around the subject boundary.
pub fn border_map(seg: &BinaryMask, se: &StructuringElement) -> BorderMap {
    let dilated = dilate(seg, se);
    let eroded = erode(seg, se);
    let data = dilated
        .data()
        .iter()
        .zip(eroded.data())
        .map(|(&d, &e)| d && !e)
        .collect();
    BorderMap {
        mask: BinaryMask::new(seg.width(), seg.height(), data).unwrap(),
        source_radius: se.radius,
    }
}

/// Build a trimap from a matte: binarize at `fg_threshold`, erode for
/// definite foreground, complement of the dilation for definite
/// background, everything else unknown.
///
/// `fg_threshold` must lie strictly inside (0, 1).
/// Threshold a matte into a segmentation mask: foreground where the
/// value reaches `fg_threshold`. The threshold must lie strictly
/// inside (0, 1).
pub fn binarize(alpha: &AlphaMatte, fg_threshold: f32) -> BinaryMask {
    assert!(
        fg_threshold > 0.0 && fg_threshold < 1.0,
        "fg_threshold must be in (0, 1)"
    );
    let (w, h) = (alpha.plane().width(), alpha.plane().height());
    let data: Vec<bool> = alpha.samples().iter().map(|&a| a >= fg_threshold).collect();
    BinaryMask::new(w, h, data).unwrap()
}

pub fn make_trimap(
    alpha: &AlphaMatte,
    fg_threshold: f32,
    unknown_se: &StructuringElement,
) -> Trimap {
    let binary = binarize(alpha, fg_threshold);
    let fg = erode(&binary, unknown_se);
    let bg = dilate(&binary, unknown_se).not();
    let labels = fg
        .data()
        .iter()
        .zip(bg.data())
        .map(|(&f, &b)| {
            if f {
                TrimapLabel::Foreground
            } else if b {
                TrimapLabel::Background
            } else {
                TrimapLabel::Unknown
            }
        })
        .collect();
    Trimap {
        width: binary.width(),
        height: binary.height(),
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask_from_str(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows
            .iter()
            .flat_map(|row| row.chars().map(|c| c == '#'))
            .collect();
        BinaryMask::new(w, h, data).unwrap()
    }

    fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
        let data = (0..w * h).map(|_| rng.random_bool(0.5)).collect();
        BinaryMask::new(w, h, data).unwrap()
    }

    #[test]
    fn erode_all_true_5x5_square_radius_1() {
        let mask = BinaryMask::splat(5, 5, true).unwrap();
        let eroded = erode(&mask, &StructuringElement::square(1));
        for y in 0..5 {
            for x in 0..5 {
                let interior = (1..4).contains(&x) && (1..4).contains(&y);
                assert_eq!(eroded.get(x, y), interior, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn erode_trivial_cases() {
        let empty = BinaryMask::splat(4, 4, false).unwrap();
        assert_eq!(erode(&empty, &StructuringElement::square(1)), empty);

        let mut single = BinaryMask::splat(5, 5, false).unwrap();
        single.set(2, 2, true);
        assert_eq!(
            erode(&single, &StructuringElement::square(1)).count_true(),
            0
        );
        assert_eq!(erode(&single, &StructuringElement::disk(2)).count_true(), 0);
    }

    #[test]
    fn dilate_single_center_5x5() {
        let mut mask = BinaryMask::splat(5, 5, false).unwrap();
        mask.set(2, 2, true);
        let dilated = dilate(&mask, &StructuringElement::square(1));
        for y in 0..5 {
            for x in 0..5 {
                let in_block = (1..4).contains(&x) && (1..4).contains(&y);
                assert_eq!(dilated.get(x, y), in_block, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn dilate_saturation_and_zero() {
        let full = BinaryMask::splat(4, 3, true).unwrap();
        assert_eq!(dilate(&full, &StructuringElement::square(2)), full);
        let empty = BinaryMask::splat(4, 3, false).unwrap();
        assert_eq!(dilate(&empty, &StructuringElement::square(2)), empty);
    }

    #[test]
    fn border_map_centered_square_is_24_pixels() {
        let seg = mask_from_str(&[".....", ".###.", ".###.", ".###.", "....."]);
        let border = border_map(&seg, &StructuringElement::square(1));
        assert_eq!(border.mask.count_true(), 24);
        assert!(!border.mask.get(2, 2), "center survives erosion");
    }

    #[test]
    fn border_map_trivial_cases() {
        let empty = BinaryMask::splat(6, 6, false).unwrap();
        assert_eq!(
            border_map(&empty, &StructuringElement::square(1))
                .mask
                .count_true(),
            0
        );

        // All-true: dilation saturates, erosion drops a ring of width radius.
        let full = BinaryMask::splat(7, 7, true).unwrap();
        let border = border_map(&full, &StructuringElement::square(2));
        for y in 0..7 {
            for x in 0..7 {
                let interior = (2..5).contains(&x) && (2..5).contains(&y);
                assert_eq!(border.mask.get(x, y), !interior, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn disk_footprint_is_not_square() {
        let disk = StructuringElement::disk(2);
        let offsets = disk.offsets();
        assert!(offsets.contains(&(0, 2)));
        assert!(!offsets.contains(&(2, 2)));
        assert_eq!(offsets.len(), 13);
    }

    #[test]
    fn separable_matches_naive_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let mask = random_mask(&mut rng, 16, 16);
            for radius in [1, 2, 3] {
                let se = StructuringElement::square(radius);
                assert_eq!(erode(&mask, &se), erode_naive(&mask, &se));
                assert_eq!(dilate(&mask, &se), dilate_naive(&mask, &se));
            }
        }
    }

    #[test]
    fn extensivity_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let se = StructuringElement::square(1);
        for _ in 0..50 {
            let a = random_mask(&mut rng, 12, 12);
            let eroded = erode(&a, &se);
            let dilated = dilate(&a, &se);
            for i in 0..a.data().len() {
                assert!(!eroded.data()[i] || a.data()[i], "erode(A) subset of A");
                assert!(!a.data()[i] || dilated.data()[i], "A subset of dilate(A)");
            }

            // b = a OR extra bits, so a subset of b.
            let extra = random_mask(&mut rng, 12, 12);
            let b_data: Vec<bool> = a
                .data()
                .iter()
                .zip(extra.data())
                .map(|(&x, &y)| x || y)
                .collect();
            let b = BinaryMask::new(12, 12, b_data).unwrap();
            let ea = erode(&a, &se);
            let eb = erode(&b, &se);
            let da = dilate(&a, &se);
            let db = dilate(&b, &se);
            for i in 0..a.data().len() {
                assert!(!ea.data()[i] || eb.data()[i], "erosion monotone");
                assert!(!da.data()[i] || db.data()[i], "dilation monotone");
            }
        }
    }

    #[test]
    fn duality_with_adjusted_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for shape in [SeShape::Square, SeShape::Disk] {
            let se = StructuringElement { shape, radius: 1 };
            for _ in 0..50 {
                let a = random_mask(&mut rng, 10, 10);
                let left = erode_assuming(&a, &se, OutOfBounds::Foreground);
                let right = dilate_assuming(&a.not(), &se, OutOfBounds::Background).not();
                assert_eq!(left, right);

                let left = dilate_assuming(&a, &se, OutOfBounds::Foreground);
                let right = erode_assuming(&a.not(), &se, OutOfBounds::Background).not();
                assert_eq!(left, right);
            }
        }
    }

    #[test]
    fn border_map_disjoint_from_erosion_subset_of_dilation() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let se = StructuringElement::square(2);
        for _ in 0..20 {
            let seg = random_mask(&mut rng, 14, 14);
            let border = border_map(&seg, &se);
            let eroded = erode(&seg, &se);
            let dilated = dilate(&seg, &se);
            for i in 0..seg.data().len() {
                assert!(!(border.mask.data()[i] && eroded.data()[i]));
                assert!(!border.mask.data()[i] || dilated.data()[i]);
            }
        }
    }

    #[test]
    fn trimap_binary_alpha_unknown_band_is_border_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let se = StructuringElement::square(1);
        let values: Vec<f32> = (0..100)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
            .collect();
        let alpha = AlphaMatte::from_values(10, 10, values.clone()).unwrap();
        let binary = BinaryMask::new(10, 10, values.iter().map(|&v| v >= 0.5).collect()).unwrap();
        let trimap = make_trimap(&alpha, 0.5, &se);
        let border = border_map(&binary, &se);
        for i in 0..100 {
            let unknown = trimap.labels()[i] == TrimapLabel::Unknown;
            assert_eq!(unknown, border.mask.data()[i], "at index {i}");
        }
    }

    #[test]
    fn trimap_all_background_and_edge_ring() {
        let se = StructuringElement::square(1);
        let zeros = AlphaMatte::splat(6, 6, 0.0).unwrap();
        let trimap = make_trimap(&zeros, 0.5, &se);
        assert_eq!(trimap.counts(), (36, 0, 0));

        // All-foreground matte: edge-clamped erosion leaves an unknown ring.
        let ones = AlphaMatte::splat(6, 6, 1.0).unwrap();
        let trimap = make_trimap(&ones, 0.5, &se);
        let (bg, unknown, fg) = trimap.counts();
        assert_eq!(bg, 0);
        assert_eq!(fg, 16);
        assert_eq!(unknown, 20);
        assert_eq!(trimap.get(0, 0), TrimapLabel::Unknown);
        assert_eq!(trimap.get(3, 3), TrimapLabel::Foreground);
    }

    #[test]
    fn trimap_labels_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let values: Vec<f32> = (0..64).map(|_| rng.random_range(0.0..=1.0f32)).collect();
        let alpha = AlphaMatte::from_values(8, 8, values).unwrap();
        let trimap = make_trimap(&alpha, 0.5, &StructuringElement::square(1));
        let (bg, unknown, fg) = trimap.counts();
        assert_eq!(bg + unknown + fg, 64);
    }

    #[test]
    fn trimap_round_trip_exact_values() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("trimap.png");
        let labels = vec![
            TrimapLabel::Background,
            TrimapLabel::Unknown,
            TrimapLabel::Foreground,
            TrimapLabel::Unknown,
        ];
        let trimap = Trimap::new(2, 2, labels.clone()).unwrap();
        trimap.save(&path).unwrap();

        // The file must contain exactly {0, 128, 255}.
        let raw = image::open(&path).unwrap().into_luma8();
        assert_eq!(raw.as_raw(), &vec![0u8, 128, 255, 128]);

        let loaded = Trimap::load(&path).unwrap();
        assert_eq!(loaded.labels(), labels.as_slice());
    }
}
