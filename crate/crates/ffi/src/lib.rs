//! C ABI for the load-monitoring toolkit.
//!
//! Conventions:
//! - Handles (`NalmTrace`, `NalmMask`, `NalmModel`) are opaque; create them
//!   through `nalm_*_read`/`nalm_model_train`/`nalm_model_load` and release
//!   them with the matching `nalm_*_free`. Freeing NULL is a no-op.
//! - Every fallible call returns a `NalmStatus`; on failure the out-pointer
//!   is set to NULL and a message is stored per thread, readable via
//!   `nalm_last_error()` until the next failure on the same thread.
//! - Strings are NUL-terminated UTF-8. Strings returned through `char **`
//!   out-pointers are owned by the caller and must be released with
//!   `nalm_string_free`.
//! - The generated header is `include/nalm.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalm::archive;
use nalm::config::SectionConfig;
use nalm::disagg::{self, DisaggError, DisaggModel};
use nalm::eval;
use nalm::events::extract_usages;
use nalm::report::{build_model, render_report};
use nalm::trace::{ApplianceId, PowerTrace, StateMask};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NalmStatus {
    /// The call succeeded.
    Ok = 0,
    /// A NULL pointer, non-UTF-8 string, or invalid value was passed.
    InvalidArgument = 1,
    /// Reading or writing a file failed.
    Io = 2,
    /// File or configuration contents were malformed.
    Parse = 3,
    /// Training, prediction, or scoring failed.
    Compute = 4,
    /// An unexpected internal failure; the library state is still sound.
    Internal = 5,
}

/// An aggregate (or single-appliance) power trace.
pub struct NalmTrace(PowerTrace);

/// A per-appliance, per-second ON/OFF matrix.
pub struct NalmMask(StateMask);

/// A trained disaggregation model.
pub struct NalmModel(DisaggModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(status: NalmStatus, message: impl std::fmt::Display) -> NalmStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("NUL stripped above");
    });
    status
}

/// Message for the most recent failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nalm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nalm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Internal plumbing
// ---------------------------------------------------------------------------

/// Run `body`, catching panics so they cannot unwind across the C boundary.
fn guarded(body: impl FnOnce() -> NalmStatus) -> NalmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(NalmStatus::Internal, format!("internal error: {message}"))
        }
    }
}

/// # Safety: `ptr` must be NULL or a NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, NalmStatus> {
    if ptr.is_null() {
        return Err(set_error(
            NalmStatus::InvalidArgument,
            format!("{what} must not be NULL"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(
            NalmStatus::InvalidArgument,
            format!("{what} must be valid UTF-8"),
        )
    })
}

unsafe fn required_ref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, NalmStatus> {
    ptr.as_ref().ok_or_else(|| {
        set_error(
            NalmStatus::InvalidArgument,
            format!("{what} must not be NULL"),
        )
    })
}

fn clear_out<T>(out: *mut *mut T) -> Result<(), NalmStatus> {
    if out.is_null() {
        return Err(set_error(
            NalmStatus::InvalidArgument,
            "out pointer must not be NULL",
        ));
    }
    unsafe { *out = ptr::null_mut() };
    Ok(())
}

fn read_file(path: &str) -> Result<String, NalmStatus> {
    std::fs::read_to_string(path)
        .map_err(|e| set_error(NalmStatus::Io, format!("cannot read {path}: {e}")))
}

fn load_sections(path: Option<&str>) -> Result<SectionConfig, NalmStatus> {
    match path {
        None => Ok(SectionConfig::default()),
        Some(path) => SectionConfig::load(Path::new(path))
            .map_err(|e| set_error(NalmStatus::Parse, e)),
    }
}

fn disagg_status(e: &DisaggError) -> NalmStatus {
    match e {
        DisaggError::Io(_) => NalmStatus::Io,
        DisaggError::Json(_) | DisaggError::BadMagic => NalmStatus::Parse,
        _ => NalmStatus::Compute,
    }
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// Read an aggregate trace file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nalm_trace_read(
    path: *const c_char,
    out: *mut *mut NalmTrace,
) -> NalmStatus {
    guarded(|| {
        if clear_out(out).is_err() {
            return NalmStatus::InvalidArgument;
        }
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let text = match read_file(path) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match archive::read_aggregate(&text) {
            Ok(trace) => {
                *out = Box::into_raw(Box::new(NalmTrace(trace)));
                NalmStatus::Ok
            }
            Err(e) => set_error(NalmStatus::Parse, format!("{path}: {e}")),
        }
    })
}

/// Number of one-second samples in the trace; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nalm_trace_len(trace: *const NalmTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Release a trace handle (NULL is a no-op).
///
/// # Safety
/// `trace` must be NULL or an owned handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nalm_trace_free(trace: *mut NalmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

/// Read an ON/OFF mask file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nalm_mask_read(
    path: *const c_char,
    out: *mut *mut NalmMask,
) -> NalmStatus {
    guarded(|| {
        if clear_out(out).is_err() {
            return NalmStatus::InvalidArgument;
        }
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let text = match read_file(path) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match archive::read_mask(&text) {
            Ok(mask) => {
                *out = Box::into_raw(Box::new(NalmMask(mask)));
                NalmStatus::Ok
            }
            Err(e) => set_error(NalmStatus::Parse, format!("{path}: {e}")),
        }
    })
}

/// Write a mask to a file in the documented text format.
///
/// # Safety
/// `mask` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nalm_mask_write(
    mask: *const NalmMask,
    path: *const c_char,
) -> NalmStatus {
    guarded(|| {
        let mask = match required_ref(mask, "mask") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match std::fs::write(path, archive::write_mask(&mask.0)) {
            Ok(()) => NalmStatus::Ok,
            Err(e) => set_error(NalmStatus::Io, format!("cannot write {path}: {e}")),
        }
    })
}

/// Number of appliances in the mask; 0 for NULL.
///
/// # Safety
/// `mask` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nalm_mask_appliance_count(mask: *const NalmMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.len())
}

/// Release a mask handle (NULL is a no-op).
///
/// # Safety
/// `mask` must be NULL or an owned handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nalm_mask_free(mask: *mut NalmMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Train a model from an aggregate trace and aligned labels. `config_path`
/// may be NULL for defaults, or name a TOML file whose `[train]` section
/// holds the hyperparameters.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nalm_model_train(
    aggregate: *const NalmTrace,
    labels: *const NalmMask,
    config_path: *const c_char,
    seed: u64,
    out: *mut *mut NalmModel,
) -> NalmStatus {
    guarded(|| {
        if clear_out(out).is_err() {
            return NalmStatus::InvalidArgument;
        }
        let aggregate = match required_ref(aggregate, "aggregate") {
            Ok(a) => a,
            Err(status) => return status,
        };
        let labels = match required_ref(labels, "labels") {
            Ok(l) => l,
            Err(status) => return status,
        };
        let config_path = if config_path.is_null() {
            None
        } else {
            match required_str(config_path, "config_path") {
                Ok(p) => Some(p),
                Err(status) => return status,
            }
        };
        let sections = match load_sections(config_path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match disagg::train(&aggregate.0, &labels.0, &sections.train, seed) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(NalmModel(model)));
                NalmStatus::Ok
            }
            Err(e) => set_error(disagg_status(&e), e),
        }
    })
}

/// Load a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nalm_model_load(
    path: *const c_char,
    out: *mut *mut NalmModel,
) -> NalmStatus {
    guarded(|| {
        if clear_out(out).is_err() {
            return NalmStatus::InvalidArgument;
        }
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match DisaggModel::load(Path::new(path)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(NalmModel(model)));
                NalmStatus::Ok
            }
            Err(e) => set_error(disagg_status(&e), format!("{path}: {e}")),
        }
    })
}

/// Save a model to a file; reloading restores it byte-identically.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nalm_model_save(
    model: *const NalmModel,
    path: *const c_char,
) -> NalmStatus {
    guarded(|| {
        let model = match required_ref(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match model.0.save(Path::new(path)) {
            Ok(()) => NalmStatus::Ok,
            Err(e) => set_error(disagg_status(&e), format!("{path}: {e}")),
        }
    })
}

/// Release a model handle (NULL is a no-op).
///
/// # Safety
/// `model` must be NULL or an owned handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nalm_model_free(model: *mut NalmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predict per-appliance ON/OFF states for an aggregate trace.
///
/// # Safety
/// Handles must be live; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nalm_model_predict(
    model: *const NalmModel,
    aggregate: *const NalmTrace,
    out: *mut *mut NalmMask,
) -> NalmStatus {
    guarded(|| {
        if clear_out(out).is_err() {
            return NalmStatus::InvalidArgument;
        }
        let model = match required_ref(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let aggregate = match required_ref(aggregate, "aggregate") {
            Ok(a) => a,
            Err(status) => return status,
        };
        match disagg::predict(&model.0, &aggregate.0) {
            Ok(mask) => {
                *out = Box::into_raw(Box::new(NalmMask(mask)));
                NalmStatus::Ok
            }
            Err(e) => set_error(disagg_status(&e), e),
        }
    })
}

// ---------------------------------------------------------------------------
// Evaluation and reports
// ---------------------------------------------------------------------------

fn string_out(out: *mut *mut c_char, text: String) -> NalmStatus {
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            NalmStatus::Ok
        }
        Err(_) => set_error(NalmStatus::Internal, "generated text contained NUL"),
    }
}

/// Score predictions against ground truth; `*out_csv` receives the metric
/// rows as CSV (per appliance plus an Overall row).
///
/// # Safety
/// Handles must be live; `out_csv` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nalm_evaluate_csv(
    predicted: *const NalmMask,
    truth: *const NalmMask,
    out_csv: *mut *mut c_char,
) -> NalmStatus {
    guarded(|| {
        if clear_out(out_csv).is_err() {
            return NalmStatus::InvalidArgument;
        }
        let predicted = match required_ref(predicted, "predicted") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let truth = match required_ref(truth, "truth") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let rows = eval::confusion(&predicted.0, &truth.0)
            .and_then(|evaluation| eval::metric_rows(&evaluation));
        match rows {
            Ok(rows) => string_out(out_csv, eval::metrics_csv(&rows)),
            Err(e) => set_error(NalmStatus::Compute, e),
        }
    })
}

/// Render the usage report for a mask: debounce, extract intervals, and fill
/// the sentence template. `config_path` may be NULL for defaults, or name a
/// TOML file whose `[debounce]` and `[template]` sections apply.
///
/// # Safety
/// `mask` must be live; strings NUL-terminated; `out_text` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nalm_report_text(
    mask: *const NalmMask,
    user: *const c_char,
    home: *const c_char,
    config_path: *const c_char,
    out_text: *mut *mut c_char,
) -> NalmStatus {
    guarded(|| {
        if clear_out(out_text).is_err() {
            return NalmStatus::InvalidArgument;
        }
        let mask = match required_ref(mask, "mask") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let user = match required_str(user, "user") {
            Ok(u) => u,
            Err(status) => return status,
        };
        let home = match required_str(home, "home") {
            Ok(h) => h,
            Err(status) => return status,
        };
        let config_path = if config_path.is_null() {
            None
        } else {
            match required_str(config_path, "config_path") {
                Ok(p) => Some(p),
                Err(status) => return status,
            }
        };
        let sections = match load_sections(config_path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let usages = extract_usages(&mask.0, sections.debounce);
        let catalog: Vec<ApplianceId> = mask.0.appliances().cloned().collect();
        let text = build_model(user, home, usages, &catalog)
            .and_then(|model| render_report(&model, &sections.template));
        match text {
            Ok(text) => string_out(out_text, text),
            Err(e) => set_error(NalmStatus::Compute, e),
        }
    })
}

/// Release a string returned through a `char **` out-pointer (NULL is a
/// no-op).
///
/// # Safety
/// `s` must be NULL or a string returned by this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nalm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
