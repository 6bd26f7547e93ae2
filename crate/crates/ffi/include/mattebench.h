#ifndef MATTEBENCH_H
#define MATTEBENCH_H

/* Generated by cbindgen from the mattebench-ffi crate. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code for every fallible call.
typedef enum {
  // The call succeeded.
  MB_OK = 0,
  // A required pointer argument was null.
  MB_NULL_ARGUMENT = 1,
  // A path or string argument was not valid UTF-8.
  MB_INVALID_UTF8 = 2,
  // A numeric argument was outside its documented range.
  MB_INVALID_ARGUMENT = 3,
  // Reading or writing a file failed.
  MB_IO_ERROR = 4,
  // Input dimensions disagree.
  MB_DIMENSION_MISMATCH = 5,
  // The computation rejected its inputs.
  MB_COMPUTE_ERROR = 6,
} MbStatus;

// Opaque RGB image handle.
typedef struct MbImage MbImage;

// Opaque alpha-matte handle.
typedef struct MbMatte MbMatte;

// Opaque trimap handle.
typedef struct MbTrimap MbTrimap;

// All matte quality metrics for one pair.
typedef struct {
  double mse;
  double mae;
  double sad;
  double grad;
  double conn;
  double mse_scaled;
  double mae_scaled;
  size_t pixel_count;
} MbMetricsReport;

// Masked L1 statistics: sum over selected samples, the number of
// selected samples, and their mean (zero when the count is zero).
typedef struct {
  double sum;
  double mean;
  size_t count;
} MbMaskedL1;

// Aggregate-loss weights.
typedef struct {
  double lambda_per;
  double beta_alpha;
  double gamma_border;
  double theta_ac;
} MbLossCoefficients;

// The five aggregate-loss terms.
typedef struct {
  double cgan;
  double perceptual;
  double alpha;
  double border;
  double alpha_coeff;
} MbLossBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread. Never
// null; empty before the first failure.
const char *mb_last_error_message(void);

// Load an RGB image from a lossless raster file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
MbStatus mb_image_load(const char *path, MbImage **out);

// Write an image as an 8- or 16-bit file, by extension.
//
// # Safety
// `img` must be a live handle and `path` a NUL-terminated string.
MbStatus mb_image_save(const MbImage *img, const char *path, uint32_t bit_depth);

// Release an image handle. Null is ignored.
//
// # Safety
// `img` must be a handle from this library, released at most once.
void mb_image_free(MbImage *img);

// Width in pixels; 0 for a null handle.
//
// # Safety
// `img` must be a live handle or null.
size_t mb_image_width(const MbImage *img);

// Height in pixels; 0 for a null handle.
//
// # Safety
// `img` must be a live handle or null.
size_t mb_image_height(const MbImage *img);

// Sample one channel (0..3) of one pixel.
//
// # Safety
// `img` must be a live handle and `out` a valid pointer.
MbStatus mb_image_value(const MbImage *img, size_t x, size_t y, size_t channel, float *out);

// Load an alpha matte from a single-channel or RGB file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
MbStatus mb_matte_load(const char *path, MbMatte **out);

// Build a matte from a row-major buffer of `width * height` samples
// in [0, 1].
//
// # Safety
// `data` must point to `width * height` readable floats and `out`
// must be a valid pointer.
MbStatus mb_matte_from_data(size_t width, size_t height, const float *data, MbMatte **out);

// Write a matte as a single-channel file.
//
// # Safety
// `matte` must be a live handle and `path` a NUL-terminated string.
MbStatus mb_matte_save(const MbMatte *matte, const char *path, uint32_t bit_depth);

// Release a matte handle. Null is ignored.
//
// # Safety
// `matte` must be a handle from this library, released at most once.
void mb_matte_free(MbMatte *matte);

// Width in pixels; 0 for a null handle.
//
// # Safety
// `matte` must be a live handle or null.
size_t mb_matte_width(const MbMatte *matte);

// Height in pixels; 0 for a null handle.
//
// # Safety
// `matte` must be a live handle or null.
size_t mb_matte_height(const MbMatte *matte);

// Sample one matte pixel.
//
// # Safety
// `matte` must be a live handle and `out` a valid pointer.
MbStatus mb_matte_value(const MbMatte *matte, size_t x, size_t y, float *out);

// Blend `fg` over `bg` through `alpha`. All inputs must share
// dimensions; the result is a new image handle.
//
// # Safety
// All handles must be live and `out` a valid pointer.
MbStatus mb_composite(const MbImage *fg, const MbImage *bg, const MbMatte *alpha, MbImage **out);

// Multiply an image by its matte, isolating the subject.
//
// # Safety
// Both handles must be live and `out` a valid pointer.
MbStatus mb_extract_foreground(const MbImage *img, const MbMatte *alpha, MbImage **out);

// All five quality metrics plus scaled conveniences for one pair.
//
// # Safety
// Both handles must be live and `out` a valid pointer.
MbStatus mb_evaluate_pair(const MbMatte *pred, const MbMatte *gt, MbMetricsReport *out);

// L1 over ground-truth pixels that are binary within `eps`.
//
// # Safety
// Both handles must be live and `out` a valid pointer.
MbStatus mb_alpha_loss(const MbMatte *pred, const MbMatte *gt, float eps, MbMaskedL1 *out);

// L1 over ground-truth pixels strictly between the binary bands.
//
// # Safety
// Both handles must be live and `out` a valid pointer.
MbStatus mb_alpha_coefficient_loss(const MbMatte *pred,
                                   const MbMatte *gt,
                                   float eps,
                                   MbMaskedL1 *out);

// L1 over the border ring derived from the ground truth: binarize at
// `fg_threshold`, then keep dilation minus erosion with a square
// element of `radius`.
//
// # Safety
// Both handles must be live and `out` a valid pointer.
MbStatus mb_border_loss(const MbMatte *pred,
                        const MbMatte *gt,
                        float fg_threshold,
                        size_t radius,
                        MbMaskedL1 *out);

// The default aggregate weights (10, 25, 50, 25).
MbLossCoefficients mb_default_coefficients(void);

// Weighted sum of the five loss terms.
//
// # Safety
// `breakdown`, `coeffs`, and `out` must be valid pointers.
MbStatus mb_total_loss(const MbLossBreakdown *breakdown,
                       const MbLossCoefficients *coeffs,
                       double *out);

// Border ring of a matte as a new 0/1 matte: binarize at
// `fg_threshold`, dilate and erode with a square element of
// `radius`, and keep the difference.
//
// # Safety
// `alpha` must be a live handle and `out` a valid pointer.
MbStatus mb_border_map(const MbMatte *alpha, float fg_threshold, size_t radius, MbMatte **out);

// Ternary trimap from a matte: erode for definite foreground, dilate
// complement for definite background, unknown elsewhere.
//
// # Safety
// `alpha` must be a live handle and `out` a valid pointer.
MbStatus mb_make_trimap(const MbMatte *alpha, float fg_threshold, size_t radius, MbTrimap **out);

// Write a trimap as an 8-bit file with values {0, 128, 255}.
//
// # Safety
// `trimap` must be a live handle and `path` a NUL-terminated string.
MbStatus mb_trimap_save(const MbTrimap *trimap, const char *path);

// Pixel totals per region.
//
// # Safety
// `trimap` must be a live handle; count pointers must be valid.
MbStatus mb_trimap_counts(const MbTrimap *trimap,
                          size_t *background,
                          size_t *unknown,
                          size_t *foreground);

// Release a trimap handle. Null is ignored.
//
// # Safety
// `trimap` must be a handle from this library, released at most once.
void mb_trimap_free(MbTrimap *trimap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MATTEBENCH_H */
