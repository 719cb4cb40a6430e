//! C ABI over `cgm_refine`.
//!
//! Every fallible function returns a [`CgmStatus`]; on failure the message is
//! available from [`cgm_last_error_message`] on the same thread. Missing
//! samples cross the boundary as NaN. Handles are opaque and must be released
//! with their `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cgm_refine::analysis::{spearman, CorrelationError};
use cgm_refine::impute::{impute_all, ImputePolicy, Stineman};
use cgm_refine::label::class_per_slot;
use cgm_refine::quality::{clean, iqr_fences, PhysiologicalBounds, QualityError};
use cgm_refine::window_file::{load_window_file, WindowFileError, WindowSet};
use cgm_refine::SubjectSeries;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    Io = 4,
    Format = 5,
    Internal = 6,
}

/// Written by `cgm_series_classes` for slots without glucose.
pub const CGM_NO_CLASS: u8 = 255;

/// Hard physiological limits. Values equal to a limit are kept.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgmBounds {
    pub glucose_min: f64,
    pub glucose_max: f64,
    pub heart_rate_min: f64,
    pub heart_rate_max: f64,
}

impl From<CgmBounds> for PhysiologicalBounds {
    fn from(b: CgmBounds) -> Self {
        Self {
            glucose_min: b.glucose_min,
            glucose_max: b.glucose_max,
            heart_rate_min: b.heart_rate_min,
            heart_rate_max: b.heart_rate_max,
        }
    }
}

/// Quartiles and 1.5·IQR fences.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgmFences {
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
}

/// One subject's series on the 5-minute grid.
pub struct CgmSeries {
    inner: SubjectSeries,
}

/// A decoded window file.
pub struct CgmWindowFile {
    inner: WindowSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Display) {
    let text = CString::new(message.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: CgmStatus, message: impl Display) -> CgmStatus {
    set_error(message);
    status
}

/// Runs `f`, turning a panic into `CgmStatus::Internal`.
fn guard(f: impl FnOnce() -> CgmStatus) -> CgmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        fail(CgmStatus::Internal, format!("internal error: {msg}"))
    })
}

unsafe fn slice<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], CgmStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(CgmStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, name: &str) -> Result<&'a mut [T], CgmStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(fail(CgmStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

fn to_missing(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|x| (!x.is_nan()).then_some(*x)).collect()
}

fn copy_out(values: &[Option<f64>], out: &mut [f64]) -> CgmStatus {
    if out.len() != values.len() {
        return fail(
            CgmStatus::InvalidArgument,
            format!("output holds {} slots, series has {}", out.len(), values.len()),
        );
    }
    for (o, v) in out.iter_mut().zip(values) {
        *o = v.unwrap_or(f64::NAN);
    }
    CgmStatus::Ok
}

/// Why the most recent call on this thread failed, or NULL if it succeeded.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn cgm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default limits: glucose 40–500 mg/dL, heart rate 30–200 bpm.
#[no_mangle]
pub extern "C" fn cgm_default_bounds() -> CgmBounds {
    let b = PhysiologicalBounds::default();
    CgmBounds {
        glucose_min: b.glucose_min,
        glucose_max: b.glucose_max,
        heart_rate_min: b.heart_rate_min,
        heart_rate_max: b.heart_rate_max,
    }
}

/// Creates a series from `len` glucose values and, when `heart_rate` is not
/// NULL, `len` heart-rate values. NaN marks a missing slot. `grid_start` is
/// in Unix seconds and must lie on a 5-minute boundary.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_new(
    glucose: *const f64,
    heart_rate: *const f64,
    len: usize,
    grid_start: i64,
    out: *mut *mut CgmSeries,
) -> CgmStatus {
    guard(|| {
        if out.is_null() {
            return fail(CgmStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let g = tri!(slice(glucose, len, "glucose"));
        let hr = if heart_rate.is_null() {
            None
        } else {
            Some(to_missing(tri!(slice(heart_rate, len, "heart_rate"))))
        };
        if grid_start % cgm_refine::series::STEP_SECONDS != 0 {
            return fail(
                CgmStatus::InvalidArgument,
                format!("grid_start {grid_start} is not on a 5-minute boundary"),
            );
        }
        let Some(start) = chrono::DateTime::from_timestamp(grid_start, 0) else {
            return fail(
                CgmStatus::InvalidArgument,
                format!("grid_start {grid_start} is out of range"),
            );
        };
        match SubjectSeries::new("ffi", "ffi", start.naive_utc(), to_missing(g), hr) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CgmSeries { inner }));
                CgmStatus::Ok
            }
            Err(e) => fail(CgmStatus::InvalidArgument, e),
        }
    })
}

/// Releases a series. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_free(series: *mut CgmSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Number of grid slots, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_len(series: *const CgmSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// Non-zero when the series carries heart rate.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_has_heart_rate(series: *const CgmSeries) -> i32 {
    series.as_ref().is_some_and(|s| s.inner.has_heart_rate()) as i32
}

/// Copies glucose into `out`, which must hold exactly `len` slots.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_copy_glucose(series: *const CgmSeries, out: *mut f64, len: usize) -> CgmStatus {
    guard(|| {
        let Some(s) = series.as_ref() else {
            return fail(CgmStatus::NullPointer, "series is null");
        };
        copy_out(&s.inner.glucose, tri!(slice_mut(out, len, "out")))
    })
}

/// Copies heart rate into `out`, which must hold exactly `len` slots.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_copy_heart_rate(series: *const CgmSeries, out: *mut f64, len: usize) -> CgmStatus {
    guard(|| {
        let Some(s) = series.as_ref() else {
            return fail(CgmStatus::NullPointer, "series is null");
        };
        let Some(hr) = &s.inner.heart_rate else {
            return fail(CgmStatus::InvalidArgument, "series has no heart-rate channel");
        };
        copy_out(hr, tri!(slice_mut(out, len, "out")))
    })
}

/// Masks zeros, hard-bound violations and IQR outliers in place. `bounds`
/// may be NULL for the defaults. `masked` (nullable) receives the number of
/// values removed.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_clean(
    series: *mut CgmSeries,
    bounds: *const CgmBounds,
    masked: *mut usize,
) -> CgmStatus {
    guard(|| {
        let Some(s) = series.as_mut() else {
            return fail(CgmStatus::NullPointer, "series is null");
        };
        let bounds: PhysiologicalBounds = bounds
            .as_ref()
            .map_or_else(PhysiologicalBounds::default, |b| (*b).into());
        if let Err(e) = bounds.validate() {
            return fail(CgmStatus::InvalidArgument, e);
        }
        let (cleaned, report) = clean(s.inner.clone(), &bounds);
        s.inner = cleaned;
        if let Some(m) = masked.as_mut() {
            *m = report.total_masked();
        }
        CgmStatus::Ok
    })
}

/// Imputes short gaps linearly and medium gaps by Stineman interpolation, in
/// place. `filled` (nullable) receives the number of slots filled.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_impute(series: *mut CgmSeries, filled: *mut usize) -> CgmStatus {
    guard(|| {
        let Some(s) = series.as_mut() else {
            return fail(CgmStatus::NullPointer, "series is null");
        };
        let (imputed, report) = impute_all(s.inner.clone(), &ImputePolicy::default());
        s.inner = imputed;
        if let Some(f) = filled.as_mut() {
            *f = report.rows.iter().map(|r| r.slots_filled()).sum();
        }
        CgmStatus::Ok
    })
}

/// Writes the time-to-hypoglycemia class (0–5) of every slot into `out`, or
/// `CGM_NO_CLASS` where glucose is missing.
#[no_mangle]
pub unsafe extern "C" fn cgm_series_classes(
    series: *const CgmSeries,
    threshold: f64,
    out: *mut u8,
    len: usize,
) -> CgmStatus {
    guard(|| {
        let Some(s) = series.as_ref() else {
            return fail(CgmStatus::NullPointer, "series is null");
        };
        if !threshold.is_finite() {
            return fail(CgmStatus::InvalidArgument, "threshold must be finite");
        }
        let out = tri!(slice_mut(out, len, "out"));
        if out.len() != s.inner.len() {
            return fail(
                CgmStatus::InvalidArgument,
                format!("output holds {} slots, series has {}", out.len(), s.inner.len()),
            );
        }
        for (o, c) in out.iter_mut().zip(class_per_slot(&s.inner.glucose, threshold)) {
            *o = c.unwrap_or(CGM_NO_CLASS);
        }
        CgmStatus::Ok
    })
}

/// Quartiles and fences of `len` finite values (at least four).
#[no_mangle]
pub unsafe extern "C" fn cgm_iqr_fences(values: *const f64, len: usize, out: *mut CgmFences) -> CgmStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(CgmStatus::NullPointer, "out is null");
        };
        let values = tri!(slice(values, len, "values"));
        if values.iter().any(|v| !v.is_finite()) {
            return fail(CgmStatus::InvalidArgument, "values must be finite");
        }
        match iqr_fences(values) {
            Ok(f) => {
                *out = CgmFences {
                    q1: f.q1,
                    q3: f.q3,
                    lower: f.lower,
                    upper: f.upper,
                };
                CgmStatus::Ok
            }
            Err(e @ QualityError::InsufficientData(_)) => fail(CgmStatus::InsufficientData, e),
            Err(e) => fail(CgmStatus::InvalidArgument, e),
        }
    })
}

/// Evaluates the Stineman interpolant through `n` knots at `m` query points.
/// Knot abscissae must increase strictly; queries must lie within them.
#[no_mangle]
pub unsafe extern "C" fn cgm_stineman_interpolate(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    queries: *const f64,
    out: *mut f64,
    m: usize,
) -> CgmStatus {
    guard(|| {
        let xs = tri!(slice(xs, n, "xs"));
        let ys = tri!(slice(ys, n, "ys"));
        let queries = tri!(slice(queries, m, "queries"));
        let out = tri!(slice_mut(out, m, "out"));
        let curve = match Stineman::new(xs.to_vec(), ys.to_vec()) {
            Ok(c) => c,
            Err(e @ cgm_refine::impute::StinemanError::InsufficientKnots(_)) => {
                return fail(CgmStatus::InsufficientData, e)
            }
            Err(e) => return fail(CgmStatus::InvalidArgument, e),
        };
        for (o, q) in out.iter_mut().zip(queries) {
            match curve.eval(*q) {
                Ok(v) => *o = v,
                Err(e) => return fail(CgmStatus::InvalidArgument, e),
            }
        }
        CgmStatus::Ok
    })
}

/// Spearman's rho with average ranks; pairs containing NaN are dropped.
#[no_mangle]
pub unsafe extern "C" fn cgm_spearman(x: *const f64, y: *const f64, n: usize, rho: *mut f64) -> CgmStatus {
    guard(|| {
        let Some(rho) = rho.as_mut() else {
            return fail(CgmStatus::NullPointer, "rho is null");
        };
        let x = tri!(slice(x, n, "x"));
        let y = tri!(slice(y, n, "y"));
        match spearman(x, y) {
            Ok(r) => {
                *rho = r;
                CgmStatus::Ok
            }
            Err(e @ (CorrelationError::TooFewPairs(_) | CorrelationError::ZeroVariance)) => {
                fail(CgmStatus::InsufficientData, e)
            }
            Err(e) => fail(CgmStatus::InvalidArgument, e),
        }
    })
}

/// Opens and validates a window file.
#[no_mangle]
pub unsafe extern "C" fn cgm_window_file_open(path: *const c_char, out: *mut *mut CgmWindowFile) -> CgmStatus {
    guard(|| {
        if out.is_null() || path.is_null() {
            return fail(CgmStatus::NullPointer, "path or out is null");
        }
        *out = ptr::null_mut();
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(CgmStatus::InvalidArgument, "path is not UTF-8");
        };
        match load_window_file(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CgmWindowFile { inner }));
                CgmStatus::Ok
            }
            Err(e @ WindowFileError::Io(_)) => fail(CgmStatus::Io, format!("{path}: {e}")),
            Err(e) => fail(CgmStatus::Format, format!("{path}: {e}")),
        }
    })
}

/// Releases a window file. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cgm_window_file_free(file: *mut CgmWindowFile) {
    if !file.is_null() {
        drop(Box::from_raw(file));
    }
}

/// Number of windows, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn cgm_window_file_count(file: *const CgmWindowFile) -> u32 {
    file.as_ref().map_or(0, |f| f.inner.header.window_count)
}

/// Time steps per window, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn cgm_window_file_length(file: *const CgmWindowFile) -> u32 {
    file.as_ref().map_or(0, |f| f.inner.header.window_length)
}

/// Values per time step, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn cgm_window_file_channels(file: *const CgmWindowFile) -> u8 {
    file.as_ref().map_or(0, |f| f.inner.header.channels)
}

/// Number of classes labels are drawn from, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn cgm_window_file_label_set_size(file: *const CgmWindowFile) -> u8 {
    file.as_ref().map_or(0, |f| f.inner.header.label_set_size)
}

/// Copies window `index` (length × channels values, row-major) into
/// `values` and its class into `label`.
#[no_mangle]
pub unsafe extern "C" fn cgm_window_file_window(
    file: *const CgmWindowFile,
    index: usize,
    values: *mut f32,
    values_len: usize,
    label: *mut u8,
) -> CgmStatus {
    guard(|| {
        let Some(f) = file.as_ref() else {
            return fail(CgmStatus::NullPointer, "file is null");
        };
        let Some(label) = label.as_mut() else {
            return fail(CgmStatus::NullPointer, "label is null");
        };
        let Some((src, class)) = f.inner.window(index) else {
            return fail(
                CgmStatus::InvalidArgument,
                format!("window {index} out of range (count {})", f.inner.len()),
            );
        };
        let dst = tri!(slice_mut(values, values_len, "values"));
        if dst.len() != src.len() {
            return fail(
                CgmStatus::InvalidArgument,
                format!("values holds {}, window has {}", dst.len(), src.len()),
            );
        }
        dst.copy_from_slice(src);
        *label = class;
        CgmStatus::Ok
    })
}
