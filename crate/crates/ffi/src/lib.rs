//! C ABI over `monoreg`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/producer
//! functions and released by the matching `*_free`. Every fallible call returns
//! a [`MonoregStatus`]; the message of the last failure on the calling thread
//! is available from [`monoreg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use monoreg::config::ExperimentConfig;
use monoreg::forward::FarFieldMatrix;
use monoreg::pipeline::{self, Reconstruction};
use monoreg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonoregStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad configuration, arguments or input data.
    InvalidInput = 2,
    /// A computation failed.
    Runtime = 3,
    /// The output buffer is shorter than the result.
    BufferTooSmall = 4,
    Panic = 5,
}

pub struct MonoregConfig(ExperimentConfig);

pub struct MonoregFarField(FarFieldMatrix);

pub struct MonoregReconstruction(Reconstruction);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> MonoregStatus {
    if err.is_validation() {
        MonoregStatus::InvalidInput
    } else {
        MonoregStatus::Runtime
    }
}

/// Runs `f` with panics and errors turned into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), (MonoregStatus, String)>) -> MonoregStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MonoregStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MonoregStatus::Panic
        }
    }
}

fn lib<T>(r: monoreg::Result<T>) -> Result<T, (MonoregStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MonoregStatus, String) {
    (MonoregStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (MonoregStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (MonoregStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MonoregStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MonoregStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (MonoregStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), (MonoregStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err((
            MonoregStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn monoreg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Forces single-threaded linear algebra for bit-identical reruns.
#[no_mangle]
pub extern "C" fn monoreg_set_deterministic() {
    pipeline::set_deterministic();
}

/// Default experiment configuration. Never null.
#[no_mangle]
pub extern "C" fn monoreg_config_default() -> *mut MonoregConfig {
    Box::into_raw(Box::new(MonoregConfig(ExperimentConfig::default())))
}

/// Parses and validates a JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn monoreg_config_from_json(json: *const c_char, out: *mut *mut MonoregConfig) -> MonoregStatus {
    guard(|| {
        let cfg = lib(ExperimentConfig::from_json(text(json, "json")?))?;
        put(out, MonoregConfig(cfg))
    })
}

/// Serializes the configuration; release the string with [`monoreg_string_free`].
///
/// # Safety
/// `cfg` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn monoreg_config_to_json(cfg: *const MonoregConfig, out: *mut *mut c_char) -> MonoregStatus {
    guard(|| {
        let cfg = borrow(cfg, "config")?;
        let json = lib(cfg.0.to_json())?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Overrides seed, noise level and wave number, then revalidates.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn monoreg_config_set(
    cfg: *mut MonoregConfig,
    seed: u64,
    noise_level: f64,
    wave_number: f64,
) -> MonoregStatus {
    guard(|| {
        let cfg = borrow_mut(cfg, "config")?;
        let mut next = cfg.0.clone();
        next.seed = seed;
        next.noise_level = noise_level;
        next.wave_number = wave_number;
        lib(next.validate())?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library; `dir` must be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn monoreg_config_set_output_dir(cfg: *mut MonoregConfig, dir: *const c_char) -> MonoregStatus {
    guard(|| {
        let cfg = borrow_mut(cfg, "config")?;
        cfg.0.output_dir = PathBuf::from(text(dir, "dir")?);
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn monoreg_config_free(cfg: *mut MonoregConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulates noisy far-field data for the configured scene.
///
/// # Safety
/// `cfg` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn monoreg_simulate(cfg: *const MonoregConfig, out: *mut *mut MonoregFarField) -> MonoregStatus {
    guard(|| {
        let cfg = borrow(cfg, "config")?;
        let sim = lib(pipeline::simulate(&cfg.0))?;
        put(out, MonoregFarField(sim.noisy))
    })
}

/// Number of directions `N`; the matrix is `N x N`. Returns 0 for null.
///
/// # Safety
/// `f` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn monoreg_far_field_size(f: *const MonoregFarField) -> usize {
    f.as_ref().map_or(0, |f| f.0.n())
}

/// Copies the far-field matrix in row-major order into `re` and `im` (`len >= N*N` each).
///
/// # Safety
/// `f` must come from this library; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn monoreg_far_field_copy(
    f: *const MonoregFarField,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> MonoregStatus {
    guard(|| {
        let f = borrow(f, "far field")?;
        let n = f.0.n();
        let (mut r, mut i) = (Vec::with_capacity(n * n), Vec::with_capacity(n * n));
        for l in 0..n {
            for m in 0..n {
                r.push(f.0.data[(l, m)].re);
                i.push(f.0.data[(l, m)].im);
            }
        }
        copy_out(&r, re, len)?;
        copy_out(&i, im, len)
    })
}

/// # Safety
/// `f` must come from this library or be null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn monoreg_far_field_free(f: *mut MonoregFarField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Monotonicity bounds and the regularized minimizer for `f`.
///
/// # Safety
/// `cfg` and `f` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn monoreg_reconstruct(
    cfg: *const MonoregConfig,
    f: *const MonoregFarField,
    out: *mut *mut MonoregReconstruction,
) -> MonoregStatus {
    guard(|| {
        let cfg = borrow(cfg, "config")?;
        let f = borrow(f, "far field")?;
        let stack = lib(pipeline::build_stack(&cfg.0))?;
        let rec = lib(pipeline::reconstruct(&cfg.0, &f.0, &stack))?;
        put(out, MonoregReconstruction(rec))
    })
}

/// Number of pixels `M`. Returns 0 for null.
///
/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn monoreg_reconstruction_len(r: *const MonoregReconstruction) -> usize {
    r.as_ref().map_or(0, |r| r.0.result.coefficients.len())
}

/// Copies the reconstructed coefficients (pixel order, `x` fastest).
///
/// # Safety
/// `r` must come from this library; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn monoreg_reconstruction_coefficients(
    r: *const MonoregReconstruction,
    out: *mut f64,
    len: usize,
) -> MonoregStatus {
    guard(|| copy_out(&borrow(r, "reconstruction")?.0.result.coefficients, out, len))
}

/// Copies the box bounds `b_m = min(q_min, beta*_m)`.
///
/// # Safety
/// `r` must come from this library; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn monoreg_reconstruction_bounds(
    r: *const MonoregReconstruction,
    out: *mut f64,
    len: usize,
) -> MonoregStatus {
    guard(|| copy_out(&borrow(r, "reconstruction")?.0.bounds.upper, out, len))
}

/// Final objective value. NaN for null.
///
/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn monoreg_reconstruction_objective(r: *const MonoregReconstruction) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.result.objective)
}

/// # Safety
/// `r` must come from this library or be null; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn monoreg_reconstruction_free(r: *mut MonoregReconstruction) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Runs the full pipeline into the configured output directory.
///
/// On success `metrics_json` (if not null) receives the metrics document;
/// release it with [`monoreg_string_free`].
///
/// # Safety
/// `cfg` must come from this library; `metrics_json` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn monoreg_run_pipeline(cfg: *const MonoregConfig, metrics_json: *mut *mut c_char) -> MonoregStatus {
    guard(|| {
        let cfg = borrow(cfg, "config")?;
        let report = lib(pipeline::run_pipeline(&cfg.0))?;
        if !metrics_json.is_null() {
            let json = serde_json::to_string(&report.metrics).map_err(|e| (MonoregStatus::Runtime, e.to_string()))?;
            *metrics_json = CString::new(json).expect("JSON has no NUL").into_raw();
        }
        Ok(())
    })
}

/// Runs the oracle suite; `passed` receives whether every check passed.
///
/// # Safety
/// `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn monoreg_selftest(passed: *mut bool) -> MonoregStatus {
    guard(|| {
        let passed = borrow_mut(passed, "passed")?;
        *passed = lib(monoreg::selftest::selftest())?.passed();
        Ok(())
    })
}

/// # Safety
/// `s` must be a string returned by this library or null.
#[no_mangle]
pub unsafe extern "C" fn monoreg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
