//! C ABI over `ling-core`.
//!
//! Problems and fits are opaque heap handles owned by the caller and released
//! with the matching `*_free`. Every entry point returns a [`LingStatus`]; on
//! failure a description is available from [`ling_last_error_message`] on the
//! same thread. Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ling_core::baselines::{pcr_fit, ridge_exact, svrg_ridge, tune_svrg_step, RidgeMode, SvrgConfig};
use ling_core::gd::{ridge_gd, GdConfig};
use ling_core::ling::{ling_fit, BasisSource, LingConfig};
use ling_core::risk::{ling_risk_analytic, rr_risk_analytic, SpectralGroundTruth};
use ling_core::{Error, FlopLedger, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LingStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    /// Singular system, rank deficiency, breakdown or non-convergence.
    Numerical = 4,
    /// SVRG objective blew up; retry with a smaller step.
    Diverged = 5,
    Io = 6,
    Panic = 7,
}

/// Training design and response.
pub struct LingProblem {
    x: Matrix,
    y: Vec<f64>,
}

/// A fitted coefficient vector with its cost.
pub struct LingFit {
    beta: Vec<f64>,
    ledger: FlopLedger,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> LingStatus {
    match err {
        Error::Shape { .. } => LingStatus::ShapeMismatch,
        Error::InvalidArgument(_) => LingStatus::InvalidArgument,
        Error::StepTooLarge { .. } => LingStatus::Diverged,
        Error::Io { .. } | Error::Parse { .. } => LingStatus::Io,
        Error::RankDeficient { .. } | Error::Singular { .. } | Error::NoConvergence { .. } | Error::Breakdown(_) => {
            LingStatus::Numerical
        }
    }
}

/// Runs `body`, recording errors and panics for [`ling_last_error_message`].
fn guard(body: impl FnOnce() -> Result<(), (LingStatus, String)>) -> LingStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LingStatus::Ok,
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
            LingStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (LingStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LingStatus, String) {
    (LingStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (LingStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `problem` must be null or a live handle from [`ling_problem_new`].
unsafe fn problem_ref<'a>(problem: *const LingProblem) -> Result<&'a LingProblem, (LingStatus, String)> {
    problem.as_ref().ok_or_else(|| null("problem"))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn emit_fit(out: *mut *mut LingFit, beta: Vec<f64>, ledger: FlopLedger) {
    *out = Box::into_raw(Box::new(LingFit { beta, ledger }));
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ling_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies an `n×p` row-major design and a length-`n` response.
///
/// # Safety
/// `x` must be valid for `n*p` reads, `y` for `n` reads and `out` for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn ling_problem_new(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    out: *mut *mut LingProblem,
) -> LingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if n == 0 || p == 0 {
            return Err((LingStatus::InvalidArgument, format!("empty problem {n}x{p}")));
        }
        let len = n
            .checked_mul(p)
            .ok_or((LingStatus::InvalidArgument, "n*p overflows".to_string()))?;
        let xs = input(x, len, "x")?;
        let ys = input(y, n, "y")?;
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err((LingStatus::InvalidArgument, "non-finite input".into()));
        }
        let x = Matrix::from_vec(n, p, xs.to_vec()).map_err(core_err)?;
        *out = Box::into_raw(Box::new(LingProblem { x, y: ys.to_vec() }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ling_problem_free(problem: *mut LingProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Closed-form ridge solution.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_exact(problem: *const LingProblem, lambda: f64, out: *mut *mut LingFit) -> LingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pr = problem_ref(problem)?;
        let mut ledger = FlopLedger::new();
        let beta = ridge_exact(&pr.x, &pr.y, lambda, RidgeMode::Auto, &mut ledger).map_err(core_err)?;
        emit_fit(out, beta, ledger);
        Ok(())
    })
}

/// `n1` steps of exact-line-search gradient descent from zero.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_gd(
    problem: *const LingProblem,
    lambda: f64,
    n1: usize,
    out: *mut *mut LingFit,
) -> LingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pr = problem_ref(problem)?;
        let mut ledger = FlopLedger::new();
        let (beta, _) = ridge_gd(&pr.x, &pr.y, &GdConfig::new(n1, lambda), &mut ledger).map_err(core_err)?;
        emit_fit(out, beta, ledger);
        Ok(())
    })
}

/// Principal component regression on a randomized top-`k1` basis.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_pcr(
    problem: *const LingProblem,
    k1: usize,
    power_iters: usize,
    seed: u64,
    out: *mut *mut LingFit,
) -> LingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pr = problem_ref(problem)?;
        let mut ledger = FlopLedger::new();
        let m = pcr_fit(&pr.x, &pr.y, k1, power_iters, seed, BasisSource::Randomized, &mut ledger)
            .map_err(core_err)?;
        emit_fit(out, m.beta_effective, ledger);
        Ok(())
    })
}

/// Two-stage fit; the stored coefficients are the folded prediction vector.
/// A nonzero `shrink` enables stage-one shrinkage.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_ling(
    problem: *const LingProblem,
    lambda: f64,
    k2: usize,
    n2: usize,
    power_iters: usize,
    seed: u64,
    shrink: i32,
    out: *mut *mut LingFit,
) -> LingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pr = problem_ref(problem)?;
        let cfg = LingConfig::new(lambda, k2, n2)
            .with_power_iters(power_iters)
            .with_seed(seed)
            .with_shrink(shrink != 0);
        let mut ledger = FlopLedger::new();
        let (m, _) = ling_fit(&pr.x, &pr.y, &cfg, &mut ledger).map_err(core_err)?;
        emit_fit(out, m.beta_effective, ledger);
        Ok(())
    })
}

/// SVRG for `passes` passes. A non-positive `step` is tuned on a held-out
/// fold first; the tuning cost is not charged.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_svrg(
    problem: *const LingProblem,
    lambda: f64,
    passes: usize,
    step: f64,
    seed: u64,
    out: *mut *mut LingFit,
) -> LingStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let pr = problem_ref(problem)?;
        let step = if step > 0.0 {
            step
        } else {
            tune_svrg_step(&pr.x, &pr.y, lambda, passes, seed).map_err(core_err)?
        };
        let mut ledger = FlopLedger::new();
        let (beta, _) =
            svrg_ridge(&pr.x, &pr.y, &SvrgConfig::new(passes, step, lambda, seed), &mut ledger).map_err(core_err)?;
        emit_fit(out, beta, ledger);
        Ok(())
    })
}

/// Number of coefficients, or 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_num_coefficients(fit: *const LingFit) -> usize {
    fit.as_ref().map_or(0, |f| f.beta.len())
}

/// Copies the coefficients into `out`, which holds `len` values.
///
/// # Safety
/// `fit` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_coefficients(fit: *const LingFit, out: *mut f64, len: usize) -> LingStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < f.beta.len() {
            return Err((
                LingStatus::ShapeMismatch,
                format!("buffer holds {len} values, fit has {}", f.beta.len()),
            ));
        }
        slice::from_raw_parts_mut(out, f.beta.len()).copy_from_slice(&f.beta);
        Ok(())
    })
}

/// Total ledger FLOPs of the fit, or 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_flops(fit: *const LingFit) -> u64 {
    fit.as_ref().map_or(0, |f| f.ledger.total())
}

/// FLOPs charged to one phase (`"svd"`, `"stage2"`, ...), or 0.
///
/// # Safety
/// `fit` must be null or a live handle; `phase` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_phase_flops(fit: *const LingFit, phase: *const c_char) -> u64 {
    match (fit.as_ref(), phase.is_null()) {
        (Some(f), false) => CStr::from_ptr(phase).to_str().map_or(0, |p| f.ledger.phase(p)),
        _ => 0,
    }
}

/// `out = X·β` for a `rows×p` row-major `x`.
///
/// # Safety
/// `fit` must be a live handle, `x` valid for `rows*p` reads and `out` for
/// `rows` writes.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_predict(
    fit: *const LingFit,
    x: *const f64,
    rows: usize,
    p: usize,
    out: *mut f64,
) -> LingStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        if p != f.beta.len() {
            return Err((
                LingStatus::ShapeMismatch,
                format!("fit has {} coefficients, x has {p} columns", f.beta.len()),
            ));
        }
        if rows == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = rows
            .checked_mul(p)
            .ok_or((LingStatus::InvalidArgument, "rows*p overflows".to_string()))?;
        let xs = input(x, len, "x")?;
        let m = Matrix::from_vec(rows, p, xs.to_vec()).map_err(core_err)?;
        let pred = m.matvec(&f.beta).map_err(core_err)?;
        slice::from_raw_parts_mut(out, rows).copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ling_fit_free(fit: *mut LingFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Analytic fixed-design risks from a spectrum: the converged two-stage
/// estimator with shrinkage at rank `k2`, and ridge.
///
/// `d` holds `len` descending singular values and `alpha` the true
/// coefficients in the right singular basis (also `len` values).
///
/// # Safety
/// `d` and `alpha` must be valid for `len` reads; the outputs for one write.
#[no_mangle]
pub unsafe extern "C" fn ling_ridge_risk(
    d: *const f64,
    alpha: *const f64,
    len: usize,
    sigma: f64,
    n: usize,
    lambda: f64,
    k2: usize,
    out_ling: *mut f64,
    out_ridge: *mut f64,
) -> LingStatus {
    guard(|| {
        if out_ling.is_null() || out_ridge.is_null() {
            return Err(null("output"));
        }
        let d = input(d, len, "d")?;
        let alpha = input(alpha, len, "alpha")?;
        let truth = SpectralGroundTruth::new(d.to_vec(), alpha.to_vec(), sigma, n, lambda).map_err(core_err)?;
        *out_ling = ling_risk_analytic(&truth, k2).map_err(core_err)?;
        *out_ridge = rr_risk_analytic(&truth);
        Ok(())
    })
}
