#ifndef CGM_REFINE_H
#define CGM_REFINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Written by `cgm_series_classes` for slots without glucose.
#define CGM_NO_CLASS 255

// Result code of every fallible call.
typedef enum {
  CGM_STATUS_OK = 0,
  CGM_STATUS_NULL_POINTER = 1,
  CGM_STATUS_INVALID_ARGUMENT = 2,
  CGM_STATUS_INSUFFICIENT_DATA = 3,
  CGM_STATUS_IO = 4,
  CGM_STATUS_FORMAT = 5,
  CGM_STATUS_INTERNAL = 6,
} CgmStatus;

// One subject's series on the 5-minute grid.
typedef struct CgmSeries CgmSeries;

// A decoded window file.
typedef struct CgmWindowFile CgmWindowFile;

// Hard physiological limits. Values equal to a limit are kept.
typedef struct {
  double glucose_min;
  double glucose_max;
  double heart_rate_min;
  double heart_rate_max;
} CgmBounds;

// Quartiles and 1.5·IQR fences.
typedef struct {
  double q1;
  double q3;
  double lower;
  double upper;
} CgmFences;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Why the most recent call on this thread failed, or NULL if it succeeded.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *cgm_last_error_message(void);

// Default limits: glucose 40–500 mg/dL, heart rate 30–200 bpm.
CgmBounds cgm_default_bounds(void);

// Creates a series from `len` glucose values and, when `heart_rate` is not
// NULL, `len` heart-rate values. NaN marks a missing slot. `grid_start` is
// in Unix seconds and must lie on a 5-minute boundary.
CgmStatus cgm_series_new(const double *glucose,
                         const double *heart_rate,
                         size_t len,
                         int64_t grid_start,
                         CgmSeries **out);

// Releases a series. NULL is ignored.
void cgm_series_free(CgmSeries *series);

// Number of grid slots, or 0 for NULL.
size_t cgm_series_len(const CgmSeries *series);

// Non-zero when the series carries heart rate.
int32_t cgm_series_has_heart_rate(const CgmSeries *series);

// Copies glucose into `out`, which must hold exactly `len` slots.
CgmStatus cgm_series_copy_glucose(const CgmSeries *series, double *out, size_t len);

// Copies heart rate into `out`, which must hold exactly `len` slots.
CgmStatus cgm_series_copy_heart_rate(const CgmSeries *series, double *out, size_t len);

// Masks zeros, hard-bound violations and IQR outliers in place. `bounds`
// may be NULL for the defaults. `masked` (nullable) receives the number of
// values removed.
CgmStatus cgm_series_clean(CgmSeries *series, const CgmBounds *bounds, size_t *masked);

// Imputes short gaps linearly and medium gaps by Stineman interpolation, in
// place. `filled` (nullable) receives the number of slots filled.
CgmStatus cgm_series_impute(CgmSeries *series, size_t *filled);

// Writes the time-to-hypoglycemia class (0–5) of every slot into `out`, or
// `CGM_NO_CLASS` where glucose is missing.
CgmStatus cgm_series_classes(const CgmSeries *series, double threshold, uint8_t *out, size_t len);

// Quartiles and fences of `len` finite values (at least four).
CgmStatus cgm_iqr_fences(const double *values, size_t len, CgmFences *out);

// Evaluates the Stineman interpolant through `n` knots at `m` query points.
// Knot abscissae must increase strictly; queries must lie within them.
CgmStatus cgm_stineman_interpolate(const double *xs,
                                   const double *ys,
                                   size_t n,
                                   const double *queries,
                                   double *out,
                                   size_t m);

// Spearman's rho with average ranks; pairs containing NaN are dropped.
CgmStatus cgm_spearman(const double *x, const double *y, size_t n, double *rho);

// Opens and validates a window file.
CgmStatus cgm_window_file_open(const char *path, CgmWindowFile **out);

// Releases a window file. NULL is ignored.
void cgm_window_file_free(CgmWindowFile *file);

// Number of windows, or 0 for NULL.
uint32_t cgm_window_file_count(const CgmWindowFile *file);

// Time steps per window, or 0 for NULL.
uint32_t cgm_window_file_length(const CgmWindowFile *file);

// Values per time step, or 0 for NULL.
uint8_t cgm_window_file_channels(const CgmWindowFile *file);

// Number of classes labels are drawn from, or 0 for NULL.
uint8_t cgm_window_file_label_set_size(const CgmWindowFile *file);

// Copies window `index` (length × channels values, row-major) into
// `values` and its class into `label`.
CgmStatus cgm_window_file_window(const CgmWindowFile *file,
                                 size_t index,
                                 float *values,
                                 size_t values_len,
                                 uint8_t *label);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGM_REFINE_H */
