//! C ABI for the anomaly-bench detectors.
//!
//! Every function returns an [`AbStatus`] code; outputs go through pointer
//! arguments. Models are opaque handles created by the `_fit` and
//! `_deserialize` constructors and released with the matching `_free`.
//! Serialized model buffers are allocated here and must be released with
//! [`ab_bytes_free`]. On any non-OK status a thread-local message is set;
//! fetch it with [`ab_last_error_message`].
//!
//! Feature matrices cross the boundary as row-major `double` buffers of
//! `rows * cols` values. Handles are immutable after creation, so sharing
//! one across threads for scoring is safe; the error message buffer is the
//! only thread-local state.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use anomaly_bench::iforest::{
    deserialize_iforest, fit_iforest, serialize_iforest, IForestParams, IsolationForestModel,
};
use anomaly_bench::matrix::Matrix;
use anomaly_bench::ocsvm::{
    deserialize_ocsvm, fit_ocsvm, serialize_ocsvm, GammaParam, OcSvmModel, OcSvmParams,
};

/// Status codes returned by every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments failed validation (shapes, parameter ranges).
    InvalidArgument = 2,
    /// Model fitting failed; see `ab_last_error_message`.
    TrainingFailed = 3,
    /// Byte stream did not decode as a model.
    DecodeFailed = 4,
    /// Internal panic was caught; see `ab_last_error_message`.
    InternalError = 5,
}

/// Opaque isolation forest handle.
pub struct AbIsolationForest(IsolationForestModel);

/// Opaque one-class SVM handle.
pub struct AbOneClassSvm(OcSvmModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: AbStatus, msg: &str) -> AbStatus {
    set_error(msg);
    status
}

/// Runs `body` with panics converted to `InternalError`.
fn guarded(body: impl FnOnce() -> AbStatus) -> AbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(AbStatus::InternalError, &msg)
        }
    }
}

/// Builds a matrix from a raw row-major buffer after validating the shape.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles.
unsafe fn matrix_from_raw(data: *const f64, rows: usize, cols: usize) -> Result<Matrix, AbStatus> {
    if data.is_null() {
        set_error("data pointer is null");
        return Err(AbStatus::NullArgument);
    }
    if rows == 0 || cols == 0 {
        set_error("rows and cols must be positive");
        return Err(AbStatus::InvalidArgument);
    }
    let slice = unsafe { std::slice::from_raw_parts(data, rows * cols) };
    Matrix::from_vec(slice.to_vec(), rows, cols).map_err(|e| {
        set_error(&e.to_string());
        AbStatus::InvalidArgument
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message into `buf` (truncated to `cap - 1` bytes,
/// always NUL-terminated when `cap > 0`) and returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn ab_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Releases a byte buffer returned by a `_serialize` call.
///
/// # Safety
/// `ptr`/`len` must come from a `_serialize` call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ab_bytes_free(ptr: *mut u8, len: usize) {
    if !ptr.is_null() {
        drop(unsafe { Box::from_raw(std::ptr::slice_from_raw_parts_mut(ptr, len)) });
    }
}

fn export_bytes(bytes: Vec<u8>, out_bytes: *mut *mut u8, out_len: *mut usize) -> AbStatus {
    let boxed = bytes.into_boxed_slice();
    let len = boxed.len();
    let ptr = Box::into_raw(boxed).cast::<u8>();
    unsafe {
        *out_bytes = ptr;
        *out_len = len;
    }
    AbStatus::Ok
}

// ---- isolation forest ----

/// Fits an isolation forest on a row-major training matrix.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_fit(
    data: *const f64,
    rows: usize,
    cols: usize,
    tree_count: u32,
    subsample_size: u32,
    contamination: f64,
    seed: u64,
    out: *mut *mut AbIsolationForest,
) -> AbStatus {
    guarded(|| {
        if out.is_null() {
            return fail(AbStatus::NullArgument, "out pointer is null");
        }
        let train = match unsafe { matrix_from_raw(data, rows, cols) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let params = IForestParams {
            tree_count: tree_count as usize,
            subsample_size: subsample_size as usize,
            contamination,
            seed,
        };
        match fit_iforest(&train, &params) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(AbIsolationForest(model))) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::TrainingFailed, &e.to_string()),
        }
    })
}

/// Anomaly score of a single point.
///
/// # Safety
/// `point` must hold `len` doubles; `model` and `out_score` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_score(
    model: *const AbIsolationForest,
    point: *const f64,
    len: usize,
    out_score: *mut f64,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || point.is_null() || out_score.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let model = unsafe { &(*model).0 };
        let point = unsafe { std::slice::from_raw_parts(point, len) };
        match model.score(point) {
            Ok(score) => {
                unsafe { *out_score = score };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Scores a row-major batch; `out_scores` receives `rows` values.
///
/// # Safety
/// Buffer contracts as in [`ab_iforest_fit`]; `out_scores` must hold
/// `rows` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_score_batch(
    model: *const AbIsolationForest,
    data: *const f64,
    rows: usize,
    cols: usize,
    out_scores: *mut f64,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || out_scores.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let batch = match unsafe { matrix_from_raw(data, rows, cols) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let model = unsafe { &(*model).0 };
        match model.scores(&batch) {
            Ok(scores) => {
                unsafe { std::ptr::copy_nonoverlapping(scores.as_ptr(), out_scores, rows) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Classifies a row-major batch against the calibrated threshold;
/// `out_labels` receives `rows` bytes (1 = anomaly).
///
/// # Safety
/// Buffer contracts as in [`ab_iforest_score_batch`].
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_classify(
    model: *const AbIsolationForest,
    data: *const f64,
    rows: usize,
    cols: usize,
    out_labels: *mut u8,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || out_labels.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let batch = match unsafe { matrix_from_raw(data, rows, cols) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let model = unsafe { &(*model).0 };
        match model.classify(&batch) {
            Ok(labels) => {
                unsafe { std::ptr::copy_nonoverlapping(labels.as_ptr(), out_labels, rows) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Calibrated score threshold of a fitted forest.
///
/// # Safety
/// `model` and `out_threshold` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_threshold(
    model: *const AbIsolationForest,
    out_threshold: *mut f64,
) -> AbStatus {
    if model.is_null() || out_threshold.is_null() {
        return fail(AbStatus::NullArgument, "null argument");
    }
    unsafe { *out_threshold = (*model).0.threshold() };
    AbStatus::Ok
}

/// Serializes the model to the portable "IFv1" byte format.
///
/// # Safety
/// `out_bytes`/`out_len` must be valid pointers; release the buffer with
/// [`ab_bytes_free`].
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_serialize(
    model: *const AbIsolationForest,
    out_bytes: *mut *mut u8,
    out_len: *mut usize,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || out_bytes.is_null() || out_len.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let bytes = serialize_iforest(unsafe { &(*model).0 });
        export_bytes(bytes, out_bytes, out_len)
    })
}

/// Decodes an "IFv1" byte stream into a new handle.
///
/// # Safety
/// `bytes` must hold `len` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_deserialize(
    bytes: *const u8,
    len: usize,
    out: *mut *mut AbIsolationForest,
) -> AbStatus {
    guarded(|| {
        if bytes.is_null() || out.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let slice = unsafe { std::slice::from_raw_parts(bytes, len) };
        match deserialize_iforest(slice) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(AbIsolationForest(model))) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::DecodeFailed, &e.to_string()),
        }
    })
}

/// Releases an isolation forest handle.
///
/// # Safety
/// `model` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ab_iforest_free(model: *mut AbIsolationForest) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

// ---- one-class SVM ----

/// Fits a one-class SVM on a row-major training matrix. A `gamma <= 0`
/// requests the `scale` heuristic (1 / (d * mean feature variance)).
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_fit(
    data: *const f64,
    rows: usize,
    cols: usize,
    nu: f64,
    gamma: f64,
    tolerance: f64,
    max_passes: u64,
    seed: u64,
    out: *mut *mut AbOneClassSvm,
) -> AbStatus {
    guarded(|| {
        if out.is_null() {
            return fail(AbStatus::NullArgument, "out pointer is null");
        }
        let train = match unsafe { matrix_from_raw(data, rows, cols) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let params = OcSvmParams {
            nu,
            gamma: if gamma > 0.0 { GammaParam::Fixed(gamma) } else { GammaParam::Scale },
            tolerance,
            max_passes: max_passes as usize,
            seed,
        };
        match fit_ocsvm(&train, &params) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(AbOneClassSvm(model))) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::TrainingFailed, &e.to_string()),
        }
    })
}

/// Decision value of a single point; negative means anomaly.
///
/// # Safety
/// `point` must hold `len` doubles; `model` and `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_decision(
    model: *const AbOneClassSvm,
    point: *const f64,
    len: usize,
    out_value: *mut f64,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || point.is_null() || out_value.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let model = unsafe { &(*model).0 };
        let point = unsafe { std::slice::from_raw_parts(point, len) };
        match model.decision_value(point) {
            Ok(value) => {
                unsafe { *out_value = value };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Decision values for a row-major batch; `out_values` receives `rows`
/// doubles.
///
/// # Safety
/// Buffer contracts as in [`ab_ocsvm_fit`]; `out_values` must hold `rows`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_decision_batch(
    model: *const AbOneClassSvm,
    data: *const f64,
    rows: usize,
    cols: usize,
    out_values: *mut f64,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || out_values.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let batch = match unsafe { matrix_from_raw(data, rows, cols) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let model = unsafe { &(*model).0 };
        match model.decision_values(&batch) {
            Ok(values) => {
                unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), out_values, rows) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Predicts labels for a row-major batch; `out_labels` receives `rows`
/// bytes (1 = anomaly, i.e. negative decision value).
///
/// # Safety
/// Buffer contracts as in [`ab_ocsvm_decision_batch`].
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_predict(
    model: *const AbOneClassSvm,
    data: *const f64,
    rows: usize,
    cols: usize,
    out_labels: *mut u8,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || out_labels.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let batch = match unsafe { matrix_from_raw(data, rows, cols) } {
            Ok(m) => m,
            Err(status) => return status,
        };
        let model = unsafe { &(*model).0 };
        match model.predict(&batch) {
            Ok(labels) => {
                unsafe { std::ptr::copy_nonoverlapping(labels.as_ptr(), out_labels, rows) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Number of retained support vectors.
///
/// # Safety
/// `model` and `out_count` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_support_vector_count(
    model: *const AbOneClassSvm,
    out_count: *mut usize,
) -> AbStatus {
    if model.is_null() || out_count.is_null() {
        return fail(AbStatus::NullArgument, "null argument");
    }
    unsafe { *out_count = (*model).0.support_vector_count() };
    AbStatus::Ok
}

/// Decision offset rho.
///
/// # Safety
/// `model` and `out_rho` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_rho(
    model: *const AbOneClassSvm,
    out_rho: *mut f64,
) -> AbStatus {
    if model.is_null() || out_rho.is_null() {
        return fail(AbStatus::NullArgument, "null argument");
    }
    unsafe { *out_rho = (*model).0.rho() };
    AbStatus::Ok
}

/// Serializes the model to the portable "OSv1" byte format.
///
/// # Safety
/// As in [`ab_iforest_serialize`].
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_serialize(
    model: *const AbOneClassSvm,
    out_bytes: *mut *mut u8,
    out_len: *mut usize,
) -> AbStatus {
    guarded(|| {
        if model.is_null() || out_bytes.is_null() || out_len.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let bytes = serialize_ocsvm(unsafe { &(*model).0 });
        export_bytes(bytes, out_bytes, out_len)
    })
}

/// Decodes an "OSv1" byte stream into a new handle.
///
/// # Safety
/// `bytes` must hold `len` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_deserialize(
    bytes: *const u8,
    len: usize,
    out: *mut *mut AbOneClassSvm,
) -> AbStatus {
    guarded(|| {
        if bytes.is_null() || out.is_null() {
            return fail(AbStatus::NullArgument, "null argument");
        }
        let slice = unsafe { std::slice::from_raw_parts(bytes, len) };
        match deserialize_ocsvm(slice) {
            Ok(model) => {
                unsafe { *out = Box::into_raw(Box::new(AbOneClassSvm(model))) };
                AbStatus::Ok
            }
            Err(e) => fail(AbStatus::DecodeFailed, &e.to_string()),
        }
    })
}

/// Releases a one-class SVM handle.
///
/// # Safety
/// `model` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ab_ocsvm_free(model: *mut AbOneClassSvm) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}
