//! C interface to fklab.
//!
//! Handles are opaque pointers released with their `_free` function.
//! Every call returns an `FklabStatus`; on failure the message is kept per
//! thread and read with `fklab_last_error`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fklab::cli::config::{ConfigFile, Model, ModelInput};
use fklab::error::Error;
use fklab::harness::{certify_ppp, CertOpts};
use fklab::kato::KatoOpts;
use fklab::kernel::{psi_gamma, q_eval, surrogate_band};
use fklab::pipeline::{perturbation_norm, run_series, SeriesOutcome, SeriesSetup};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FklabStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Config = 4,
    Numeric = 5,
    Resolution = 6,
    Divergence = 7,
    BeyondHorizon = 8,
    OutOfClass = 9,
    Degenerate = 10,
    Unsupported = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// A resolved model: parameters, domain, measure and jump functional.
pub struct FklabModel {
    inner: Model,
}

/// A finished series run with its certificates.
pub struct FklabSeries {
    inner: SeriesOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> FklabStatus {
    match e {
        Error::Domain(_) => FklabStatus::Domain,
        Error::Config(_) => FklabStatus::Config,
        Error::Numeric(_) => FklabStatus::Numeric,
        Error::Resolution(_) => FklabStatus::Resolution,
        Error::Divergence { .. } => FklabStatus::Divergence,
        Error::BeyondHorizon { .. } => FklabStatus::BeyondHorizon,
        Error::OutOfClass(_) => FklabStatus::OutOfClass,
        Error::Degenerate(_) => FklabStatus::Degenerate,
        Error::Unsupported(_) => FklabStatus::Unsupported,
        Error::Io(_) => FklabStatus::Io,
    }
}

enum Fail {
    Status(FklabStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> FklabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FklabStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            FklabStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(FklabStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Status(FklabStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn point<'a>(p: *const f64, d: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, d))
}

unsafe fn model_ref<'a>(m: *const FklabModel) -> Result<&'a Model, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fklab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fklab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a model from the model fields of a JSON configuration (`preset`,
/// `d`, `alpha`, `gamma`, `c0`, `m`, `geometry`, `mu`, `jump`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_model_from_json(json: *const c_char, out: *mut *mut FklabModel) -> FklabStatus {
    guard(|| {
        let cfg = ConfigFile::parse(text(json, "json")?)?;
        let m = ModelInput::from_file(&cfg).resolve()?;
        put(out, Box::into_raw(Box::new(FklabModel { inner: m })), "out")
    })
}

/// Builds a named preset with its default parameters.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_model_from_preset(name: *const c_char, out: *mut *mut FklabModel) -> FklabStatus {
    guard(|| {
        let inp = ModelInput { preset: Some(text(name, "name")?.to_string()), ..Default::default() };
        let m = inp.resolve()?;
        put(out, Box::into_raw(Box::new(FklabModel { inner: m })), "out")
    })
}

/// # Safety
/// `m` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fklab_model_free(m: *mut FklabModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dimension of the model.
///
/// # Safety
/// `m` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_model_dim(m: *const FklabModel, out: *mut usize) -> FklabStatus {
    guard(|| put(out, model_ref(m)?.params.d, "out"))
}

/// Comparison kernel `q(t, x, y)`; `x` and `y` hold `d` coordinates.
///
/// # Safety
/// `x`, `y` must point to `d` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_q(m: *const FklabModel, t: f64, x: *const f64, y: *const f64, out: *mut f64) -> FklabStatus {
    guard(|| {
        let m = model_ref(m)?;
        let d = m.params.d;
        put(out, q_eval(&m.params, t, point(x, d, "x")?, point(y, d, "y")?)?, "out")
    })
}

/// Boundary factor `psi_gamma(t, x, y)` of the model's domain.
///
/// # Safety
/// As for `fklab_q`.
#[no_mangle]
pub unsafe extern "C" fn fklab_psi(m: *const FklabModel, t: f64, x: *const f64, y: *const f64, out: *mut f64) -> FklabStatus {
    guard(|| {
        let m = model_ref(m)?;
        let d = m.params.d;
        put(out, psi_gamma(&m.params, &m.geometry, t, point(x, d, "x")?, point(y, d, "y")?)?, "out")
    })
}

/// Two-sided band `psi q / c0 <= . <= c0 psi q`, for `0 < t <= 1`.
///
/// # Safety
/// As for `fklab_q`; `lower` and `upper` writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_band(
    m: *const FklabModel,
    t: f64,
    x: *const f64,
    y: *const f64,
    lower: *mut f64,
    upper: *mut f64,
) -> FklabStatus {
    guard(|| {
        let m = model_ref(m)?;
        let d = m.params.d;
        let (lo, hi) = surrogate_band(&m.params, &m.geometry, t, point(x, d, "x")?, point(y, d, "y")?)?;
        put(lower, lo, "lower")?;
        put(upper, hi, "upper")
    })
}

/// `N_{|mu|}(t) + N_{|F_1|}(t)` of the model.
///
/// # Safety
/// `m` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_perturbation_norm(m: *const FklabModel, t: f64, out: *mut f64) -> FklabStatus {
    guard(|| {
        let m = model_ref(m)?;
        let f1 = fklab::measure::derive_f1(&m.jump);
        put(out, perturbation_norm(&m.params, &m.geometry, &m.mu, &f1, t, &KatoOpts::default())?, "out")
    })
}

/// Runs the series; `setup_json` may be null for defaults.
///
/// # Safety
/// `m` live; `setup_json` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_series_run(m: *const FklabModel, setup_json: *const c_char, out: *mut *mut FklabSeries) -> FklabStatus {
    guard(|| {
        let m = model_ref(m)?;
        let setup: SeriesSetup = if setup_json.is_null() {
            SeriesSetup::default()
        } else {
            serde_json::from_str(text(setup_json, "setup_json")?).map_err(|e| Error::Config(format!("series setup: {e}")))?
        };
        let o = run_series(&m.params, &m.geometry, &m.mu, &m.jump, &setup, &KatoOpts::default())?;
        put(out, Box::into_raw(Box::new(FklabSeries { inner: o })), "out")
    })
}

/// # Safety
/// `s` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fklab_series_free(s: *mut FklabSeries) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

unsafe fn series_ref<'a>(s: *const FklabSeries) -> Result<&'a SeriesOutcome, Fail> {
    s.as_ref().map(|s| &s.inner).ok_or_else(|| null("series"))
}

/// Horizon `t1`, whether every certificate held, and the grid shape.
///
/// # Safety
/// `s` live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_series_info(
    s: *const FklabSeries,
    t1: *mut f64,
    passed: *mut bool,
    n_times: *mut usize,
    n_x: *mut usize,
) -> FklabStatus {
    guard(|| {
        let s = series_ref(s)?;
        put(t1, s.horizon.t1, "t1")?;
        put(passed, s.passed, "passed")?;
        put(n_times, s.result.grid.nt(), "n_times")?;
        put(n_x, s.result.grid.nx(), "n_x")
    })
}

/// Grid time `ti` and node `xi`.
///
/// # Safety
/// `s` live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_series_node(s: *const FklabSeries, ti: usize, xi: usize, t: *mut f64, x: *mut f64) -> FklabStatus {
    guard(|| {
        let s = series_ref(s)?;
        let g = &s.result.grid;
        if ti >= g.nt() || xi >= g.nx() {
            return Err(Fail::Lib(Error::Domain(format!("node ({ti}, {xi}) outside a {}x{} grid", g.nt(), g.nx()))));
        }
        put(t, g.times[ti], "t")?;
        put(x, g.xs[xi], "x")
    })
}

/// `p0` and the summed kernel `q` at grid indices.
///
/// # Safety
/// `s` live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_series_value(
    s: *const FklabSeries,
    ti: usize,
    xi: usize,
    yi: usize,
    p0: *mut f64,
    q: *mut f64,
) -> FklabStatus {
    guard(|| {
        let s = series_ref(s)?;
        let g = &s.result.grid;
        if ti >= g.nt() || xi >= g.nx() || yi >= g.nx() {
            return Err(Fail::Lib(Error::Domain(format!("index ({ti}, {xi}, {yi}) outside the grid"))));
        }
        let i = g.index(ti, xi, yi);
        put(p0, s.result.p0[i], "p0")?;
        put(q, s.result.q[i], "q")
    })
}

/// Writes the full outcome as JSON into `buf`; `needed` receives the size
/// including the NUL. Returns `BufferTooSmall` when `len < needed`.
///
/// # Safety
/// `buf` null or `len` writable bytes; `needed` writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_series_json(s: *const FklabSeries, buf: *mut c_char, len: usize, needed: *mut usize) -> FklabStatus {
    guard(|| {
        let s = series_ref(s)?;
        let j = serde_json::to_string(s).map_err(|e| Error::Numeric(e.to_string()))?;
        put(needed, j.len() + 1, "needed")?;
        if buf.is_null() || len < j.len() + 1 {
            return Err(Fail::Status(FklabStatus::BufferTooSmall, format!("{} bytes needed", j.len() + 1)));
        }
        ptr::copy_nonoverlapping(j.as_ptr(), buf as *mut u8, j.len());
        *buf.add(j.len()) = 0;
        Ok(())
    })
}

/// Sweeps the three-point product inequality with `n` samples; reports the
/// largest ratio, the constant it is checked against, and the verdict.
///
/// # Safety
/// Outputs writable.
#[no_mangle]
pub unsafe extern "C" fn fklab_certify_ppp(
    d: usize,
    alpha: f64,
    n: usize,
    seed: u64,
    max_ratio: *mut f64,
    constant: *mut f64,
    passed: *mut bool,
) -> FklabStatus {
    guard(|| {
        let params = fklab::kernel::KernelParams::new(d, alpha, 0.0, 2.0)?;
        let r = certify_ppp(&params, &CertOpts::new(n, seed))?;
        put(max_ratio, r.max_ratio, "max_ratio")?;
        put(constant, r.stated_constant.unwrap_or(f64::NAN), "constant")?;
        put(passed, r.passed, "passed")
    })
}
