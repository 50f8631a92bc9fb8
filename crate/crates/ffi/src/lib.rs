//! C ABI over `dirac-lab`.
//!
//! Objects cross the boundary as opaque handles (`DlFamily`, `DlProblem`,
//! `DlScattering`) created by `dl_*_new`-style calls and released by the
//! matching `dl_*_free`.  Every fallible call returns a `DlStatus`; on failure
//! the message is kept per thread and can be copied out with
//! `dl_last_error`.  Matrices are written as interleaved `(re, im)` doubles in
//! row-major order, so a `n x n` matrix needs `2 n n` doubles.
//!
//! Handles are not synchronised: do not use one handle from two threads at
//! once.

use dirac_lab::adiabatic_projections::Adiabatic;
use dirac_lab::evolution::{Propagator, StepperConfig};
use dirac_lab::geometry::{FamilySpec, GridSpec};
use dirac_lab::moller_scattering::{moller_projection, Direction, Schedule, ScatteringResult};
use dirac_lab::{CMat, Error, Problem};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Family = 4,
    Spectral = 5,
    Convergence = 6,
    Numerical = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DlDirection {
    Out = 0,
    In = 1,
}

/// Metric family description.
pub struct DlFamily(FamilySpec);

/// A family on a grid, reduced and assembled.
pub struct DlProblem(Arc<Problem>);

/// A Moller limit `c^+-` with its diagnostics.
pub struct DlScattering {
    result: ScatteringResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> DlStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Config { .. } => DlStatus::Config,
        Error::Family { .. } | Error::NotStatic(_) | Error::FlowIntegration { .. } => DlStatus::Family,
        Error::SpectralGap { .. } | Error::SpectralFlow { .. } | Error::Modification { .. } => DlStatus::Spectral,
        Error::Convergence { .. } => DlStatus::Convergence,
        Error::Io(_) | Error::Json(_) | Error::Container(_) => DlStatus::Io,
        _ => DlStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (DlStatus, String)>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_default()));
            DlStatus::Panic
        }
    }
}

fn lib(e: Error) -> (DlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DlStatus, String) {
    (DlStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (DlStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn write_matrix(m: &CMat, buf: *mut f64, len: usize) -> Result<(), (DlStatus, String)> {
    let need = 2 * m.nrows() * m.ncols();
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < need {
        return Err((DlStatus::BufferTooSmall, format!("buffer holds {len} doubles, need {need}")));
    }
    let out = std::slice::from_raw_parts_mut(buf, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let k = 2 * (i * m.ncols() + j);
            out[k] = z.re;
            out[k + 1] = z.im;
        }
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`).  Returns the full message length
/// in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Built-in family by name (`flat`, `static`, `bump`, `cosmological-ramp`,
/// `shifted`).  A NaN `mu` keeps the default exponent.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_family_builtin(name: *const c_char, mu: f64, out: *mut *mut DlFamily) -> DlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = text(name, "name")?;
        let spec = FamilySpec::builtin(name, if mu.is_nan() { None } else { Some(mu) }).map_err(lib)?;
        spec.validate().map_err(lib)?;
        *out = Box::into_raw(Box::new(DlFamily(spec)));
        Ok(())
    })
}

/// Family from the body of a `[family]` table in TOML.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_family_from_toml(toml: *const c_char, out: *mut *mut DlFamily) -> DlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = FamilySpec::from_toml(text(toml, "toml")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(DlFamily(spec)));
        Ok(())
    })
}

/// # Safety
/// `family` must come from `dl_family_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_family_free(family: *mut DlFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Reduces the family and sets it up on `points` nodes (even, at least 4).
///
/// # Safety
/// `family` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_problem_new(family: *const DlFamily, points: u32, out: *mut *mut DlProblem) -> DlStatus {
    guard(|| {
        let fam = family.as_ref().ok_or_else(|| null("family"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = GridSpec::new(points as usize, fam.0.circumference()).map_err(lib)?;
        let p = Problem::new(fam.0.build().map_err(lib)?, grid).map_err(lib)?;
        *out = Box::into_raw(Box::new(DlProblem(Arc::new(p))));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from `dl_problem_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_problem_free(problem: *mut DlProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Matrix dimension `2 M`.
///
/// # Safety
/// `problem` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_problem_dim(problem: *const DlProblem, out: *mut usize) -> DlStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = p.0.dim();
        Ok(())
    })
}

/// Reduced Hamiltonian at time `t` into `buf` (`len` doubles).
///
/// # Safety
/// `problem` must be a live handle; `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_problem_hamiltonian(problem: *const DlProblem, t: f64, buf: *mut f64, len: usize) -> DlStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let h = p.0.hamiltonian(t).map_err(lib)?;
        write_matrix(&h.matrix, buf, len)
    })
}

/// Moller limit on the geometric schedule `10, 20, ... <= t_max` with
/// stepper tolerance `tol` (NaN keeps the default).
///
/// # Safety
/// `problem` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_scattering_compute(
    problem: *const DlProblem,
    direction: DlDirection,
    t_max: f64,
    tol: f64,
    out: *mut *mut DlScattering,
) -> DlStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = StepperConfig::default();
        if !tol.is_nan() {
            cfg.tol = tol;
        }
        cfg.validate().map_err(lib)?;
        let schedule = Schedule { t_max, ..Default::default() };
        let dir = match direction {
            DlDirection::Out => Direction::Out,
            DlDirection::In => Direction::In,
        };
        let mut prop = Propagator::new(p.0.clone(), cfg);
        let ad = Adiabatic::for_problem(p.0.clone()).map_err(lib)?;
        let result = moller_projection(&mut prop, &ad, dir, &schedule).map_err(lib)?;
        *out = Box::into_raw(Box::new(DlScattering { result }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from `dl_scattering_compute` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_scattering_free(s: *mut DlScattering) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Fitted decay exponent of the Moller differences; NaN when the sequence
/// was constant.
///
/// # Safety
/// `s` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_scattering_mu_hat(s: *const DlScattering, out: *mut f64) -> DlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scattering"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.result.mu_hat.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `s` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_scattering_tail_bound(s: *const DlScattering, out: *mut f64) -> DlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scattering"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.result.tail_bound;
        Ok(())
    })
}

/// Largest projection residual (idempotency, completeness, selfadjointness).
///
/// # Safety
/// `s` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn dl_scattering_residual(s: *const DlScattering, out: *mut f64) -> DlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scattering"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.result.purified.max();
        Ok(())
    })
}

/// `c^+` for `sign > 0`, `c^-` otherwise, into `buf` (`len` doubles).
///
/// # Safety
/// `s` must be a live handle; `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dl_scattering_projection(s: *const DlScattering, sign: i32, buf: *mut f64, len: usize) -> DlStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scattering"))?;
        write_matrix(if sign > 0 { &s.result.c_plus } else { &s.result.c_minus }, buf, len)
    })
}
