//! Compositing and the multiplicative extraction operations.
//!
//! The core relation is `out = alpha * fg + (1 - alpha) * bg` per pixel,
//! with the same scalar alpha applied to all three channels.

use std::path::PathBuf;

use thiserror::Error;

use crate::imagecore::{AlphaMatte, BinaryMask, ChannelStack, ImageError, Raster, RgbImage};

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("dimension mismatch: {what}: {expected_w}x{expected_h} vs {actual_w}x{actual_h}")]
    DimensionMismatch {
        what: &'static str,
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

fn check_dims<A: Raster, B: Raster>(
    a: &A,
    b: &B,
    what: &'static str,
) -> Result<(), ComposeError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(ComposeError::DimensionMismatch {
            what,
            expected_w: a.width(),
            expected_h: a.height(),
            actual_w: b.width(),
            actual_h: b.height(),
        });
    }
    Ok(())
}

fn check_mask_dims<A: Raster>(a: &A, mask: &BinaryMask, what: &'static str) -> Result<(), ComposeError> {
    if a.width() != mask.width() || a.height() != mask.height() {
        return Err(ComposeError::DimensionMismatch {
            what,
            expected_w: a.width(),
            expected_h: a.height(),
            actual_w: mask.width(),
            actual_h: mask.height(),
        });
    }
    Ok(())
}

/// A composited image together with its matte and provenance.
#[derive(Debug, Clone)]
pub struct CompositePair {
    pub composite: RgbImage,
    pub alpha: AlphaMatte,
    pub fg_source: PathBuf,
    pub bg_source: PathBuf,
}

impl CompositePair {
    pub fn new(
        composite: RgbImage,
        alpha: AlphaMatte,
        fg_source: PathBuf,
        bg_source: PathBuf,
    ) -> Result<Self, ComposeError> {
        check_dims(&composite, &alpha, "composite vs alpha")?;
        Ok(Self {
            composite,
            alpha,
            fg_source,
            bg_source,
        })
    }
}

/// Blend foreground over background through the matte.
pub fn composite(
    fg: &RgbImage,
    bg: &RgbImage,
    alpha: &AlphaMatte,
) -> Result<RgbImage, ComposeError> {
    check_dims(fg, bg, "fg vs bg")?;
    check_dims(fg, alpha, "fg vs alpha")?;
    let fg_s = fg.samples();
    let bg_s = bg.samples();
    let a_s = alpha.samples();
    let mut out = Vec::with_capacity(fg_s.len());
    for (i, &a) in a_s.iter().enumerate() {
        let base = i * 3;
        for c in 0..3 {
            let f = fg_s[base + c];
            let b = bg_s[base + c];
            out.push((a * f + (1.0 - a) * b).clamp(0.0, 1.0));
        }
    }
    Ok(RgbImage::new(fg.width(), fg.height(), out)?)
}

/// Multiply the image by the matte: the "foreground subject".
pub fn extract_foreground(img: &RgbImage, alpha: &AlphaMatte) -> Result<RgbImage, ComposeError> {
    check_dims(img, alpha, "img vs alpha")?;
    let img_s = img.samples();
    let a_s = alpha.samples();
    let mut out = Vec::with_capacity(img_s.len());
    for (i, &a) in a_s.iter().enumerate() {
        let base = i * 3;
        for c in 0..3 {
            out.push((a * img_s[base + c]).clamp(0.0, 1.0));
        }
    }
    Ok(RgbImage::new(img.width(), img.height(), out)?)
}

/// Gate the image by a hard segmentation: masked-out pixels become 0.
pub fn apply_segmentation(img: &RgbImage, seg: &BinaryMask) -> Result<RgbImage, ComposeError> {
    check_mask_dims(img, seg, "img vs seg")?;
    let img_s = img.samples();
    let mut out = Vec::with_capacity(img_s.len());
    for (i, &keep) in seg.data().iter().enumerate() {
        let base = i * 3;
        for c in 0..3 {
            out.push(if keep { img_s[base + c] } else { 0.0 });
        }
    }
    Ok(RgbImage::new(img.width(), img.height(), out)?)
}

/// Depth-concatenate RGB and alpha into a 4-channel raster
/// (channels 0-2 = image, channel 3 = alpha).
pub fn concat_alpha(img: &RgbImage, alpha: &AlphaMatte) -> Result<ChannelStack, ComposeError> {
    check_dims(img, alpha, "img vs alpha")?;
    let img_s = img.samples();
    let a_s = alpha.samples();
    let mut out = Vec::with_capacity(a_s.len() * 4);
    for (i, &a) in a_s.iter().enumerate() {
        let base = i * 3;
        out.extend_from_slice(&img_s[base..base + 3]);
        out.push(a);
    }
    Ok(ChannelStack::new(img.width(), img.height(), 4, out)?)
}
