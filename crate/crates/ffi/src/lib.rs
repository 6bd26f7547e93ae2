//! C ABI over the matting toolkit: opaque handles for images, mattes,
//! and trimaps, status-code error reporting, and plain structs for
//! metric and loss results. Every function is safe to call with null
//! pointers and reports failures through `MbStatus` plus a per-thread
//! message readable via `mb_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use mattebench::compose;
use mattebench::imagecore::{
    load_alpha, load_rgb, save_image, AlphaMatte, BitDepth, Raster, RgbImage,
};
use mattebench::losses;
use mattebench::metrics;
use mattebench::morphology::{binarize, border_map, make_trimap, StructuringElement, Trimap};

/// Result code for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbStatus {
    /// The call succeeded.
    MbOk = 0,
    /// A required pointer argument was null.
    MbNullArgument = 1,
    /// A path or string argument was not valid UTF-8.
    MbInvalidUtf8 = 2,
    /// A numeric argument was outside its documented range.
    MbInvalidArgument = 3,
    /// Reading or writing a file failed.
    MbIoError = 4,
    /// Input dimensions disagree.
    MbDimensionMismatch = 5,
    /// The computation rejected its inputs.
    MbComputeError = 6,
}

/// Opaque RGB image handle.
pub struct MbImage(RgbImage);

/// Opaque alpha-matte handle.
pub struct MbMatte(AlphaMatte);

/// Opaque trimap handle.
pub struct MbTrimap(Trimap);

/// Masked L1 statistics: sum over selected samples, the number of
/// selected samples, and their mean (zero when the count is zero).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbMaskedL1 {
    pub sum: f64,
    pub mean: f64,
    pub count: usize,
}

/// The five aggregate-loss terms.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbLossBreakdown {
    pub cgan: f64,
    pub perceptual: f64,
    pub alpha: f64,
    pub border: f64,
    pub alpha_coeff: f64,
}

/// Aggregate-loss weights.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbLossCoefficients {
    pub lambda_per: f64,
    pub beta_alpha: f64,
    pub gamma_border: f64,
    pub theta_ac: f64,
}

/// All matte quality metrics for one pair.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbMetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub sad: f64,
    pub grad: f64,
    pub conn: f64,
    pub mse_scaled: f64,
    pub mae_scaled: f64,
    pub pixel_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: MbStatus, message: impl std::fmt::Display) -> MbStatus {
    let text = CString::new(message.to_string())
        .unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    status
}

/// Message for the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread. Never
/// null; empty before the first failure.
#[no_mangle]
pub extern "C" fn mb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn path_from(ptr: *const c_char) -> Result<std::path::PathBuf, MbStatus> {
    if ptr.is_null() {
        return Err(fail(MbStatus::MbNullArgument, "path is null"));
    }
    let raw = unsafe { CStr::from_ptr(ptr) };
    match raw.to_str() {
        Ok(s) => Ok(Path::new(s).to_path_buf()),
        Err(_) => Err(fail(MbStatus::MbInvalidUtf8, "path is not valid UTF-8")),
    }
}

unsafe fn required<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, MbStatus> {
    if ptr.is_null() {
        Err(fail(
            MbStatus::MbNullArgument,
            format!("{what} must not be null"),
        ))
    } else {
        Ok(&*ptr)
    }
}

fn bit_depth_from(bits: u32) -> Result<BitDepth, MbStatus> {
    match bits {
        8 => Ok(BitDepth::Eight),
        16 => Ok(BitDepth::Sixteen),
        other => Err(fail(
            MbStatus::MbInvalidArgument,
            format!("bit depth must be 8 or 16, got {other}"),
        )),
    }
}

fn image_status(e: mattebench::imagecore::ImageError) -> MbStatus {
    fail(MbStatus::MbIoError, format!("imagecore: {e}"))
}

fn compose_status(e: compose::ComposeError) -> MbStatus {
    fail(MbStatus::MbDimensionMismatch, format!("compose: {e}"))
}

/// Load an RGB image from a lossless raster file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_image_load(path: *const c_char, out: *mut *mut MbImage) -> MbStatus {
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match load_rgb(&path) {
        Ok(img) => {
            *out = Box::into_raw(Box::new(MbImage(img)));
            MbStatus::MbOk
        }
        Err(e) => image_status(e),
    }
}

/// Write an image as an 8- or 16-bit file, by extension.
///
/// # Safety
/// `img` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_image_save(
    img: *const MbImage,
    path: *const c_char,
    bit_depth: u32,
) -> MbStatus {
    let img = match required(img, "img") {
        Ok(i) => i,
        Err(status) => return status,
    };
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let depth = match bit_depth_from(bit_depth) {
        Ok(d) => d,
        Err(status) => return status,
    };
    match save_image(&img.0, &path, depth) {
        Ok(()) => MbStatus::MbOk,
        Err(e) => image_status(e),
    }
}

/// Release an image handle. Null is ignored.
///
/// # Safety
/// `img` must be a handle from this library, released at most once.
#[no_mangle]
pub unsafe extern "C" fn mb_image_free(img: *mut MbImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Width in pixels; 0 for a null handle.
///
/// # Safety
/// `img` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mb_image_width(img: *const MbImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// Height in pixels; 0 for a null handle.
///
/// # Safety
/// `img` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mb_image_height(img: *const MbImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Sample one channel (0..3) of one pixel.
///
/// # Safety
/// `img` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_image_value(
    img: *const MbImage,
    x: usize,
    y: usize,
    channel: usize,
    out: *mut f32,
) -> MbStatus {
    let img = match required(img, "img") {
        Ok(i) => i,
        Err(status) => return status,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    if x >= img.0.width() || y >= img.0.height() || channel >= 3 {
        return fail(
            MbStatus::MbInvalidArgument,
            format!("sample ({x}, {y}, {channel}) out of bounds"),
        );
    }
    *out = img.0.pixel(x, y)[channel];
    MbStatus::MbOk
}

/// Load an alpha matte from a single-channel or RGB file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_matte_load(path: *const c_char, out: *mut *mut MbMatte) -> MbStatus {
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match load_alpha(&path) {
        Ok(matte) => {
            *out = Box::into_raw(Box::new(MbMatte(matte)));
            MbStatus::MbOk
        }
        Err(e) => image_status(e),
    }
}

/// Build a matte from a row-major buffer of `width * height` samples
/// in [0, 1].
///
/// # Safety
/// `data` must point to `width * height` readable floats and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_matte_from_data(
    width: usize,
    height: usize,
    data: *const f32,
    out: *mut *mut MbMatte,
) -> MbStatus {
    if out.is_null() || data.is_null() {
        return fail(MbStatus::MbNullArgument, "data and out must not be null");
    }
    let samples = std::slice::from_raw_parts(data, width * height).to_vec();
    match AlphaMatte::from_values(width, height, samples) {
        Ok(matte) => {
            *out = Box::into_raw(Box::new(MbMatte(matte)));
            MbStatus::MbOk
        }
        Err(e) => fail(MbStatus::MbComputeError, format!("imagecore: {e}")),
    }
}

/// Write a matte as a single-channel file.
///
/// # Safety
/// `matte` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_matte_save(
    matte: *const MbMatte,
    path: *const c_char,
    bit_depth: u32,
) -> MbStatus {
    let matte = match required(matte, "matte") {
        Ok(m) => m,
        Err(status) => return status,
    };
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let depth = match bit_depth_from(bit_depth) {
        Ok(d) => d,
        Err(status) => return status,
    };
    match save_image(&matte.0, &path, depth) {
        Ok(()) => MbStatus::MbOk,
        Err(e) => image_status(e),
    }
}

/// Release a matte handle. Null is ignored.
///
/// # Safety
/// `matte` must be a handle from this library, released at most once.
#[no_mangle]
pub unsafe extern "C" fn mb_matte_free(matte: *mut MbMatte) {
    if !matte.is_null() {
        drop(Box::from_raw(matte));
    }
}

/// Width in pixels; 0 for a null handle.
///
/// # Safety
/// `matte` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mb_matte_width(matte: *const MbMatte) -> usize {
    matte.as_ref().map_or(0, |m| m.0.width())
}

/// Height in pixels; 0 for a null handle.
///
/// # Safety
/// `matte` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mb_matte_height(matte: *const MbMatte) -> usize {
    matte.as_ref().map_or(0, |m| m.0.height())
}

/// Sample one matte pixel.
///
/// # Safety
/// `matte` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_matte_value(
    matte: *const MbMatte,
    x: usize,
    y: usize,
    out: *mut f32,
) -> MbStatus {
    let matte = match required(matte, "matte") {
        Ok(m) => m,
        Err(status) => return status,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    if x >= matte.0.width() || y >= matte.0.height() {
        return fail(
            MbStatus::MbInvalidArgument,
            format!("sample ({x}, {y}) out of bounds"),
        );
    }
    *out = matte.0.get(x, y);
    MbStatus::MbOk
}

/// Blend `fg` over `bg` through `alpha`. All inputs must share
/// dimensions; the result is a new image handle.
///
/// # Safety
/// All handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_composite(
    fg: *const MbImage,
    bg: *const MbImage,
    alpha: *const MbMatte,
    out: *mut *mut MbImage,
) -> MbStatus {
    let (fg, bg, alpha) = match (
        required(fg, "fg"),
        required(bg, "bg"),
        required(alpha, "alpha"),
    ) {
        (Ok(f), Ok(b), Ok(a)) => (f, b, a),
        (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    match compose::composite(&fg.0, &bg.0, &alpha.0) {
        Ok(img) => {
            *out = Box::into_raw(Box::new(MbImage(img)));
            MbStatus::MbOk
        }
        Err(e) => compose_status(e),
    }
}

/// Multiply an image by its matte, isolating the subject.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_extract_foreground(
    img: *const MbImage,
    alpha: *const MbMatte,
    out: *mut *mut MbImage,
) -> MbStatus {
    let (img, alpha) = match (required(img, "img"), required(alpha, "alpha")) {
        (Ok(i), Ok(a)) => (i, a),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    match compose::extract_foreground(&img.0, &alpha.0) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(MbImage(result)));
            MbStatus::MbOk
        }
        Err(e) => compose_status(e),
    }
}

/// All five quality metrics plus scaled conveniences for one pair.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_evaluate_pair(
    pred: *const MbMatte,
    gt: *const MbMatte,
    out: *mut MbMetricsReport,
) -> MbStatus {
    let (pred, gt) = match (required(pred, "pred"), required(gt, "gt")) {
        (Ok(p), Ok(g)) => (p, g),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    match metrics::evaluate_pair(&pred.0, &gt.0) {
        Ok(report) => {
            *out = MbMetricsReport {
                mse: report.mse,
                mae: report.mae,
                sad: report.sad,
                grad: report.grad,
                conn: report.conn,
                mse_scaled: report.mse_scaled,
                mae_scaled: report.mae_scaled,
                pixel_count: report.pixel_count,
            };
            MbStatus::MbOk
        }
        Err(e) => fail(MbStatus::MbComputeError, format!("metrics: {e}")),
    }
}

fn masked_out(r: losses::MaskedL1Result) -> MbMaskedL1 {
    MbMaskedL1 {
        sum: r.sum,
        mean: r.mean,
        count: r.count,
    }
}

fn check_eps(eps: f32) -> Result<(), MbStatus> {
    if (0.0..0.5).contains(&eps) {
        Ok(())
    } else {
        Err(fail(
            MbStatus::MbInvalidArgument,
            format!("eps must be in [0, 0.5), got {eps}"),
        ))
    }
}

fn check_threshold(t: f32) -> Result<(), MbStatus> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(fail(
            MbStatus::MbInvalidArgument,
            format!("fg_threshold must be in (0, 1), got {t}"),
        ))
    }
}

/// L1 over ground-truth pixels that are binary within `eps`.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_alpha_loss(
    pred: *const MbMatte,
    gt: *const MbMatte,
    eps: f32,
    out: *mut MbMaskedL1,
) -> MbStatus {
    let (pred, gt) = match (required(pred, "pred"), required(gt, "gt")) {
        (Ok(p), Ok(g)) => (p, g),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    if let Err(status) = check_eps(eps) {
        return status;
    }
    match losses::alpha_loss(&pred.0, &gt.0, eps) {
        Ok(result) => {
            *out = masked_out(result);
            MbStatus::MbOk
        }
        Err(e) => fail(MbStatus::MbDimensionMismatch, format!("losses: {e}")),
    }
}

/// L1 over ground-truth pixels strictly between the binary bands.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_alpha_coefficient_loss(
    pred: *const MbMatte,
    gt: *const MbMatte,
    eps: f32,
    out: *mut MbMaskedL1,
) -> MbStatus {
    let (pred, gt) = match (required(pred, "pred"), required(gt, "gt")) {
        (Ok(p), Ok(g)) => (p, g),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    if let Err(status) = check_eps(eps) {
        return status;
    }
    match losses::alpha_coefficient_loss(&pred.0, &gt.0, eps) {
        Ok(result) => {
            *out = masked_out(result);
            MbStatus::MbOk
        }
        Err(e) => fail(MbStatus::MbDimensionMismatch, format!("losses: {e}")),
    }
}

/// L1 over the border ring derived from the ground truth: binarize at
/// `fg_threshold`, then keep dilation minus erosion with a square
/// element of `radius`.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_border_loss(
    pred: *const MbMatte,
    gt: *const MbMatte,
    fg_threshold: f32,
    radius: usize,
    out: *mut MbMaskedL1,
) -> MbStatus {
    let (pred, gt) = match (required(pred, "pred"), required(gt, "gt")) {
        (Ok(p), Ok(g)) => (p, g),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    if let Err(status) = check_threshold(fg_threshold) {
        return status;
    }
    let region = border_map(
        &binarize(&gt.0, fg_threshold),
        &StructuringElement::square(radius),
    );
    match losses::border_loss(&pred.0, &gt.0, &region) {
        Ok(result) => {
            *out = masked_out(result);
            MbStatus::MbOk
        }
        Err(e) => fail(MbStatus::MbDimensionMismatch, format!("losses: {e}")),
    }
}

/// The default aggregate weights (10, 25, 50, 25).
#[no_mangle]
pub extern "C" fn mb_default_coefficients() -> MbLossCoefficients {
    let c = losses::LossCoefficients::default();
    MbLossCoefficients {
        lambda_per: c.lambda_per,
        beta_alpha: c.beta_alpha,
        gamma_border: c.gamma_border,
        theta_ac: c.theta_ac,
    }
}

/// Weighted sum of the five loss terms.
///
/// # Safety
/// `breakdown`, `coeffs`, and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mb_total_loss(
    breakdown: *const MbLossBreakdown,
    coeffs: *const MbLossCoefficients,
    out: *mut f64,
) -> MbStatus {
    let (breakdown, coeffs) = match (required(breakdown, "breakdown"), required(coeffs, "coeffs"))
    {
        (Ok(b), Ok(c)) => (b, c),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    let breakdown = losses::LossBreakdown {
        cgan: breakdown.cgan,
        perceptual: breakdown.perceptual,
        alpha: breakdown.alpha,
        border: breakdown.border,
        alpha_coeff: breakdown.alpha_coeff,
    };
    let coeffs = losses::LossCoefficients {
        lambda_per: coeffs.lambda_per,
        beta_alpha: coeffs.beta_alpha,
        gamma_border: coeffs.gamma_border,
        theta_ac: coeffs.theta_ac,
    };
    match losses::total_loss(&breakdown, &coeffs) {
        Ok(total) => {
            *out = total;
            MbStatus::MbOk
        }
        Err(e) => fail(MbStatus::MbInvalidArgument, format!("losses: {e}")),
    }
}

/// Border ring of a matte as a new 0/1 matte: binarize at
/// `fg_threshold`, dilate and erode with a square element of
/// `radius`, and keep the difference.
///
/// # Safety
/// `alpha` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_border_map(
    alpha: *const MbMatte,
    fg_threshold: f32,
    radius: usize,
    out: *mut *mut MbMatte,
) -> MbStatus {
    let alpha = match required(alpha, "alpha") {
        Ok(a) => a,
        Err(status) => return status,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    if let Err(status) = check_threshold(fg_threshold) {
        return status;
    }
    let region = border_map(
        &binarize(&alpha.0, fg_threshold),
        &StructuringElement::square(radius),
    );
    let data: Vec<f32> = region
        .mask
        .data()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let matte =
        AlphaMatte::from_values(region.mask.width(), region.mask.height(), data).unwrap();
    *out = Box::into_raw(Box::new(MbMatte(matte)));
    MbStatus::MbOk
}

/// Ternary trimap from a matte: erode for definite foreground, dilate
/// complement for definite background, unknown elsewhere.
///
/// # Safety
/// `alpha` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_make_trimap(
    alpha: *const MbMatte,
    fg_threshold: f32,
    radius: usize,
    out: *mut *mut MbTrimap,
) -> MbStatus {
    let alpha = match required(alpha, "alpha") {
        Ok(a) => a,
        Err(status) => return status,
    };
    if out.is_null() {
        return fail(MbStatus::MbNullArgument, "out must not be null");
    }
    if let Err(status) = check_threshold(fg_threshold) {
        return status;
    }
    let trimap = make_trimap(&alpha.0, fg_threshold, &StructuringElement::square(radius));
    *out = Box::into_raw(Box::new(MbTrimap(trimap)));
    MbStatus::MbOk
}

/// Write a trimap as an 8-bit file with values {0, 128, 255}.
///
/// # Safety
/// `trimap` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mb_trimap_save(
    trimap: *const MbTrimap,
    path: *const c_char,
) -> MbStatus {
    let trimap = match required(trimap, "trimap") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match trimap.0.save(&path) {
        Ok(()) => MbStatus::MbOk,
        Err(e) => fail(MbStatus::MbIoError, format!("morphology: {e}")),
    }
}

/// Pixel totals per region.
///
/// # Safety
/// `trimap` must be a live handle; count pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_trimap_counts(
    trimap: *const MbTrimap,
    background: *mut usize,
    unknown: *mut usize,
    foreground: *mut usize,
) -> MbStatus {
    let trimap = match required(trimap, "trimap") {
        Ok(t) => t,
        Err(status) => return status,
    };
    if background.is_null() || unknown.is_null() || foreground.is_null() {
        return fail(MbStatus::MbNullArgument, "count pointers must not be null");
    }
    let (bg, unk, fg) = trimap.0.counts();
    *background = bg;
    *unknown = unk;
    *foreground = fg;
    MbStatus::MbOk
}

/// Release a trimap handle. Null is ignored.
///
/// # Safety
/// `trimap` must be a handle from this library, released at most once.
#[no_mangle]
pub unsafe extern "C" fn mb_trimap_free(trimap: *mut MbTrimap) {
    if !trimap.is_null() {
        drop(Box::from_raw(trimap));
    }
}
