//! C interface to the trimhill estimators.
//!
//! Objects are opaque handles created by `*_new`/`*_select_*` functions and
//! released with the matching `*_free`. Every function returns a
//! [`TrimhillStatus`]; on failure [`trimhill_last_error`] describes the
//! problem. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trimhill::estimators::{trim_path, trimmed_hill};
use trimhill::ewst::{select_k0, Decision, EwstConfig, EwstOutcome, StartRule};
use trimhill::kselect::{joint_select, KSelectConfig};
use trimhill::{OrderedSample, TailError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimhillStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Size = 3,
    Index = 4,
    Degenerate = 5,
    Selection = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// A validated sample sorted in descending order.
pub struct TrimhillSample(OrderedSample);

/// Result of sequential outlier testing.
pub struct TrimhillEwstOutcome(EwstOutcome);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &TailError) -> TrimhillStatus {
    match e {
        TailError::Domain(_) | TailError::Parse { .. } => TrimhillStatus::Domain,
        TailError::Size { .. } => TrimhillStatus::Size,
        TailError::Index(_) => TrimhillStatus::Index,
        TailError::Degenerate { .. } => TrimhillStatus::Degenerate,
        TailError::Selection(_) | TailError::Iteration { .. } => TrimhillStatus::Selection,
        TailError::Io(_) | TailError::Simulation(_) => TrimhillStatus::Internal,
    }
}

struct Fail(TrimhillStatus, String);

impl From<TailError> for Fail {
    fn from(e: TailError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TrimhillStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TrimhillStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TrimhillStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TrimhillStatus::Internal
        }
    }
}

unsafe fn sample_ref<'a>(s: *const TrimhillSample) -> Result<&'a OrderedSample, Fail> {
    s.as_ref().map(|s| &s.0).ok_or_else(|| null("sample"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message describing the most recent failure on this thread; empty after a
/// success. Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn trimhill_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn trimhill_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len` values, validates them and sorts them descending.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimhill_sample_new(
    values: *const f64,
    len: usize,
    out: *mut *mut TrimhillSample,
) -> TrimhillStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let sample = OrderedSample::new(data)?;
        out.write(Box::into_raw(Box::new(TrimhillSample(sample))));
        Ok(())
    })
}

/// # Safety
/// `sample` must come from [`trimhill_sample_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn trimhill_sample_free(sample: *mut TrimhillSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of values, or 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trimhill_sample_len(sample: *const TrimhillSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Trimmed Hill estimate and its plug-in standard error (`se` may be null).
///
/// # Safety
/// Handles must be live; `xi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimhill_trimmed_hill(
    sample: *const TrimhillSample,
    k0: usize,
    k: usize,
    xi: *mut f64,
    se: *mut f64,
) -> TrimhillStatus {
    guard(|| {
        let est = trimmed_hill(sample_ref(sample)?, k0, k)?;
        write(xi, est.xi_hat, "xi")?;
        if !se.is_null() {
            se.write(est.se);
        }
        Ok(())
    })
}

/// Classic Hill estimate.
///
/// # Safety
/// As for [`trimhill_trimmed_hill`].
#[no_mangle]
pub unsafe extern "C" fn trimhill_hill(
    sample: *const TrimhillSample,
    k: usize,
    xi: *mut f64,
) -> TrimhillStatus {
    trimhill_trimmed_hill(sample, 0, k, xi, ptr::null_mut())
}

/// Writes the `k` estimates for `k0 = 0..k-1` into `buf`. `written` receives
/// `k` in every case, so a call with `capacity = 0` queries the size.
///
/// # Safety
/// `buf` must have room for `capacity` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimhill_trim_path(
    sample: *const TrimhillSample,
    k: usize,
    buf: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> TrimhillStatus {
    guard(|| {
        let path = trim_path(sample_ref(sample)?, k)?;
        write(written, path.estimates.len(), "written")?;
        if capacity < path.estimates.len() {
            return Err(Fail(
                TrimhillStatus::BufferTooSmall,
                format!("need {} slots, got {capacity}", path.estimates.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(path.estimates.as_ptr(), buf, path.estimates.len());
        Ok(())
    })
}

/// Sequential testing for the number of outliers at tail size `k`.
/// `capped` selects the start rule `min(k - 2, ceil(10 sqrt(k)))`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimhill_select_k0(
    sample: *const TrimhillSample,
    k: usize,
    q: f64,
    a: f64,
    capped: bool,
    out: *mut *mut TrimhillEwstOutcome,
) -> TrimhillStatus {
    guard(|| {
        let rule = if capped { StartRule::CAPPED } else { StartRule::Full };
        let cfg = EwstConfig::new(q, a, rule)?;
        let outcome = select_k0(sample_ref(sample)?, k, &cfg)?;
        write(out, Box::into_raw(Box::new(TrimhillEwstOutcome(outcome))), "out")
    })
}

/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trimhill_ewst_outcome_k0_hat(outcome: *const TrimhillEwstOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.0.k0_hat)
}

/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trimhill_ewst_outcome_trace_len(
    outcome: *const TrimhillEwstOutcome,
) -> usize {
    outcome.as_ref().map_or(0, |o| o.0.trace.len())
}

/// One scan step; any output pointer may be null.
///
/// # Safety
/// `outcome` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn trimhill_ewst_outcome_step(
    outcome: *const TrimhillEwstOutcome,
    index: usize,
    k0: *mut usize,
    u: *mut f64,
    threshold: *mut f64,
    rejected: *mut bool,
) -> TrimhillStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| null("outcome"))?;
        let step = o.0.trace.get(index).ok_or_else(|| {
            Fail(
                TrimhillStatus::Index,
                format!("step {index} out of range for {} steps", o.0.trace.len()),
            )
        })?;
        if !k0.is_null() {
            k0.write(step.k0);
        }
        if !u.is_null() {
            u.write(step.u);
        }
        if !threshold.is_null() {
            threshold.write(step.threshold);
        }
        if !rejected.is_null() {
            rejected.write(step.decision == Decision::Reject);
        }
        Ok(())
    })
}

/// # Safety
/// `outcome` must come from [`trimhill_select_k0`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn trimhill_ewst_outcome_free(outcome: *mut TrimhillEwstOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Joint selection of `(k0, k)` with default settings.
///
/// # Safety
/// Handles must be live; outputs must be writable (`converged` may be null).
#[no_mangle]
pub unsafe extern "C" fn trimhill_joint_select(
    sample: *const TrimhillSample,
    k0: *mut usize,
    k: *mut usize,
    converged: *mut bool,
) -> TrimhillStatus {
    guard(|| {
        let res = joint_select(
            sample_ref(sample)?,
            &KSelectConfig::default(),
            &EwstConfig::default(),
        )?;
        write(k0, res.k0_hat, "k0")?;
        write(k, res.k_hat, "k")?;
        if !converged.is_null() {
            converged.write(res.converged);
        }
        Ok(())
    })
}
