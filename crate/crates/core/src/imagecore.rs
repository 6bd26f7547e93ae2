//! Raster types and image file I/O.
//!
//! Every pixel carrier in this crate stores row-major `f32` samples
//! normalized to `[0, 1]`, regardless of the bit depth of the file it
//! came from. Constructors enforce the range and length invariants, so
//! downstream math never has to re-validate.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors produced by raster construction and file I/O.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {path}")]
    FileNotFound { path: PathBuf },
    #[error("unsupported format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("corrupt data in {path}: {reason}")]
    CorruptData { path: PathBuf, reason: String },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid path: {path}")]
    InvalidPath { path: PathBuf },
    #[error("sample data length {actual} does not match {width}x{height}x{channels}")]
    DataLengthMismatch {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("sample {value} at index {index} is outside [0, 1]")]
    SampleOutOfRange { index: usize, value: f32 },
    #[error("raster dimensions must be nonzero")]
    ZeroDimension,
    #[error("resize target dimensions must be nonzero")]
    ZeroDimensionTarget,
}

fn validate_samples(
    width: usize,
    height: usize,
    channels: usize,
    data: &[f32],
) -> Result<(), ImageError> {
    if width == 0 || height == 0 || channels == 0 {
        return Err(ImageError::ZeroDimension);
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(ImageError::ZeroDimension)?;
    if data.len() != expected {
        return Err(ImageError::DataLengthMismatch {
            width,
            height,
            channels,
            actual: data.len(),
        });
    }
    for (index, &value) in data.iter().enumerate() {
        // NaN fails the comparison and is rejected here too.
        if !(0.0..=1.0).contains(&value) {
            return Err(ImageError::SampleOutOfRange { index, value });
        }
    }
    Ok(())
}

/// Common access to row-major `[0, 1]` sample rasters.
///
/// Implemented by every pixel carrier so geometric operations (resize,
/// pyramids, patch extraction) can be written once.
pub trait Raster: Sized + Clone {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn channels(&self) -> usize;
    fn samples(&self) -> &[f32];
    /// Rebuild the same kind of raster from validated parts.
    fn from_samples(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ImageError>;

    /// Sample index of `(x, y, c)`.
    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width() + x) * self.channels() + c
    }
}

/// Three-channel image with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        validate_samples(width, height, 3, &data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constant-valued image.
    pub fn splat(width: usize, height: usize, value: f32) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height * 3])
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

impl Raster for RgbImage {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        3
    }
    fn samples(&self) -> &[f32] {
        &self.data
    }
    fn from_samples(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ImageError> {
        if channels != 3 {
            return Err(ImageError::DataLengthMismatch {
                width,
                height,
                channels: 3,
                actual: data.len(),
            });
        }
        Self::new(width, height, data)
    }
}

/// Single-channel raster with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        validate_samples(width, height, 1, &data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn splat(width: usize, height: usize, value: f32) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

impl Raster for ImagePlane {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        1
    }
    fn samples(&self) -> &[f32] {
        &self.data
    }
    fn from_samples(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ImageError> {
        if channels != 1 {
            return Err(ImageError::DataLengthMismatch {
                width,
                height,
                channels: 1,
                actual: data.len(),
            });
        }
        Self::new(width, height, data)
    }
}

/// Per-pixel opacity map: 0 = pure background, 1 = pure foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    plane: ImagePlane,
}

impl AlphaMatte {
    pub fn new(plane: ImagePlane) -> Self {
        Self { plane }
    }

    pub fn from_values(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        Ok(Self::new(ImagePlane::new(width, height, data)?))
    }

    pub fn splat(width: usize, height: usize, value: f32) -> Result<Self, ImageError> {
        Ok(Self::new(ImagePlane::splat(width, height, value)?))
    }

    pub fn plane(&self) -> &ImagePlane {
        &self.plane
    }

    pub fn into_plane(self) -> ImagePlane {
        self.plane
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.plane.get(x, y)
    }

    /// Replicate the matte onto three channels. Used to feed extractors
    /// and losses that expect RGB input.
    pub fn to_rgb(&self) -> RgbImage {
        let mut data = Vec::with_capacity(self.plane.data.len() * 3);
        for &v in &self.plane.data {
            data.extend_from_slice(&[v, v, v]);
        }
        RgbImage {
            width: self.plane.width,
            height: self.plane.height,
            data,
        }
    }
}

impl Raster for AlphaMatte {
    fn width(&self) -> usize {
        self.plane.width
    }
    fn height(&self) -> usize {
        self.plane.height
    }
    fn channels(&self) -> usize {
        1
    }
    fn samples(&self) -> &[f32] {
        &self.plane.data
    }
    fn from_samples(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ImageError> {
        Ok(Self::new(ImagePlane::from_samples(
            width, height, channels, data,
        )?))
    }
}

/// Depth-concatenated raster with an arbitrary channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ChannelStack {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ImageError> {
        validate_samples(width, height, channels, &data)?;
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Extract channel `c` as a plane.
    pub fn channel(&self, c: usize) -> ImagePlane {
        assert!(c < self.channels, "channel {c} out of range");
        let data = (0..self.width * self.height)
            .map(|i| self.data[i * self.channels + c])
            .collect();
        ImagePlane {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

impl Raster for ChannelStack {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn samples(&self) -> &[f32] {
        &self.data
    }
    fn from_samples(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ImageError> {
        Self::new(width, height, channels, data)
    }
}

/// Hard per-pixel segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension);
        }
        if data.len() != width * height {
            return Err(ImageError::DataLengthMismatch {
                width,
                height,
                channels: 1,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn splat(width: usize, height: usize, value: bool) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }
}

impl fmt::Display for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                f.write_str(if self.get(x, y) { "#" } else { "." })?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// Kind selector for [`load_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Rgb,
    Gray,
}

/// Either raster kind a file can decode to.
#[derive(Debug, Clone)]
pub enum LoadedImage {
    Rgb(RgbImage),
    Gray(ImagePlane),
}

/// Bits per sample for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }

    /// One quantization step: the round-trip error bound per sample.
    pub fn quantization_step(self) -> f64 {
        1.0 / self.max_value()
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage, ImageError> {
    if !path.exists() {
        return Err(ImageError::FileNotFound {
            path: path.to_path_buf(),
        });
    }
    image::open(path).map_err(|err| match err {
        image::ImageError::Unsupported(e) => ImageError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        },
        image::ImageError::IoError(e) => ImageError::Io {
            path: path.to_path_buf(),
            source: e,
        },
        other => ImageError::CorruptData {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

/// Load an 8- or 16-bit lossless raster file, scaling samples to `[0, 1]`
/// by the bit-depth maximum.
pub fn load_image(path: &Path, kind: LoadKind) -> Result<LoadedImage, ImageError> {
    let dynamic = open_image(path)?;
    let width = dynamic.width() as usize;
    let height = dynamic.height() as usize;
    let build = |data: Vec<f32>, channels: usize| -> Result<LoadedImage, ImageError> {
        validate_samples(width, height, channels, &data).map_err(|_| ImageError::CorruptData {
            path: path.to_path_buf(),
            reason: "decoded samples out of range".into(),
        })?;
        Ok(match channels {
            1 => LoadedImage::Gray(ImagePlane {
                width,
                height,
                data,
            }),
            _ => LoadedImage::Rgb(RgbImage {
                width,
                height,
                data,
            }),
        })
    };
    match kind {
        LoadKind::Rgb => {
            // 16-bit sources keep their precision; everything else decodes via 8-bit.
            let data: Vec<f32> = match dynamic {
                image::DynamicImage::ImageRgb16(buf) => {
                    buf.into_raw().iter().map(|&v| v as f32 / 65535.0).collect()
                }
                image::DynamicImage::ImageRgba16(buf) => {
                    let raw = buf.into_raw();
                    raw.chunks_exact(4)
                        .flat_map(|px| px[..3].iter().map(|&v| v as f32 / 65535.0))
                        .collect()
                }
                image::DynamicImage::ImageLuma16(buf) => buf
                    .into_raw()
                    .iter()
                    .flat_map(|&v| {
                        let s = v as f32 / 65535.0;
                        [s, s, s]
                    })
                    .collect(),
                other => other
                    .into_rgb8()
                    .into_raw()
                    .iter()
                    .map(|&v| v as f32 / 255.0)
                    .collect(),
            };
            build(data, 3)
        }
        LoadKind::Gray => {
            let data: Vec<f32> = match dynamic {
                image::DynamicImage::ImageLuma16(buf) => {
                    buf.into_raw().iter().map(|&v| v as f32 / 65535.0).collect()
                }
                image::DynamicImage::ImageLumaA16(buf) => {
                    let raw = buf.into_raw();
                    raw.chunks_exact(2)
                        .map(|px| px[0] as f32 / 65535.0)
                        .collect()
                }
                other => other
                    .into_luma8()
                    .into_raw()
                    .iter()
                    .map(|&v| v as f32 / 255.0)
                    .collect(),
            };
            build(data, 1)
        }
    }
}

/// Load a grayscale file as an alpha matte.
pub fn load_alpha(path: &Path) -> Result<AlphaMatte, ImageError> {
    match load_image(path, LoadKind::Gray)? {
        LoadedImage::Gray(plane) => Ok(AlphaMatte::new(plane)),
        LoadedImage::Rgb(_) => unreachable!("gray load produced rgb"),
    }
}

/// Load an RGB file.
pub fn load_rgb(path: &Path) -> Result<RgbImage, ImageError> {
    match load_image(path, LoadKind::Rgb)? {
        LoadedImage::Rgb(img) => Ok(img),
        LoadedImage::Gray(_) => unreachable!("rgb load produced gray"),
    }
}

fn quantize(value: f32, max: f64) -> u64 {
    // Round-half-up keeps the round-trip error within one step.
    (value as f64 * max + 0.5).floor() as u64
}

fn check_parent(path: &Path) -> Result<(), ImageError> {
    match path.parent() {
        Some(parent) if parent.as_os_str().is_empty() => Ok(()),
        Some(parent) if parent.is_dir() => Ok(()),
        _ => Err(ImageError::InvalidPath {
            path: path.to_path_buf(),
        }),
    }
}

fn map_save_err(path: &Path, err: image::ImageError) -> ImageError {
    match err {
        image::ImageError::IoError(e) => ImageError::Io {
            path: path.to_path_buf(),
            source: e,
        },
        other => ImageError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Save a raster as a lossless PNG at the requested bit depth.
///
/// Round-trip error is bounded by one quantization step per sample.
pub fn save_image<R: Raster>(img: &R, path: &Path, bit_depth: BitDepth) -> Result<(), ImageError> {
    check_parent(path)?;
    let width = img.width() as u32;
    let height = img.height() as u32;
    let samples = img.samples();
    match (img.channels(), bit_depth) {
        (1, BitDepth::Eight) => {
            let raw: Vec<u8> = samples.iter().map(|&s| quantize(s, 255.0) as u8).collect();
            image::GrayImage::from_raw(width, height, raw)
                .expect("raster invariants guarantee the buffer size")
                .save(path)
                .map_err(|e| map_save_err(path, e))
        }
        (1, BitDepth::Sixteen) => {
            let raw: Vec<u16> = samples
                .iter()
                .map(|&s| quantize(s, 65535.0) as u16)
                .collect();
            image::ImageBuffer::<image::Luma<u16>, _>::from_raw(width, height, raw)
                .expect("raster invariants guarantee the buffer size")
                .save(path)
                .map_err(|e| map_save_err(path, e))
        }
        (3, BitDepth::Eight) => {
            let raw: Vec<u8> = samples.iter().map(|&s| quantize(s, 255.0) as u8).collect();
            image::RgbImage::from_raw(width, height, raw)
                .expect("raster invariants guarantee the buffer size")
                .save(path)
                .map_err(|e| map_save_err(path, e))
        }
        (3, BitDepth::Sixteen) => {
            let raw: Vec<u16> = samples
                .iter()
                .map(|&s| quantize(s, 65535.0) as u16)
                .collect();
            image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(width, height, raw)
                .expect("raster invariants guarantee the buffer size")
                .save(path)
                .map_err(|e| map_save_err(path, e))
        }
        (c, _) => Err(ImageError::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("{c}-channel rasters have no file representation"),
        }),
    }
}

/// Bilinear resize with edge-clamped sampling. Outputs are clamped to `[0, 1]`.
pub fn resize<R: Raster>(img: &R, target_w: usize, target_h: usize) -> Result<R, ImageError> {
    if target_w == 0 || target_h == 0 {
        return Err(ImageError::ZeroDimensionTarget);
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    if target_w == w && target_h == h {
        return Ok(img.clone());
    }
    let src = img.samples();
    let scale_x = w as f64 / target_w as f64;
    let scale_y = h as f64 / target_h as f64;
    let mut out = Vec::with_capacity(target_w * target_h * c);
    for ty in 0..target_h {
        // Pixel-center mapping keeps same-size resizes exact.
        let sy = (ty as f64 + 0.5) * scale_y - 0.5;
        let y0 = sy.floor();
        let fy = (sy - y0) as f32;
        let y0i = (y0 as isize).clamp(0, h as isize - 1) as usize;
        let y1i = (y0 as isize + 1).clamp(0, h as isize - 1) as usize;
        for tx in 0..target_w {
            let sx = (tx as f64 + 0.5) * scale_x - 0.5;
            let x0 = sx.floor();
            let fx = (sx - x0) as f32;
            let x0i = (x0 as isize).clamp(0, w as isize - 1) as usize;
            let x1i = (x0 as isize + 1).clamp(0, w as isize - 1) as usize;
            for ch in 0..c {
                let s00 = src[(y0i * w + x0i) * c + ch];
                let s01 = src[(y0i * w + x1i) * c + ch];
                let s10 = src[(y1i * w + x0i) * c + ch];
                let s11 = src[(y1i * w + x1i) * c + ch];
                let top = s00 + (s01 - s00) * fx;
                let bottom = s10 + (s11 - s10) * fx;
                let value = top + (bottom - top) * fy;
                out.push(value.clamp(0.0, 1.0));
            }
        }
    }
    R::from_samples(target_w, target_h, c, out)
}
