//! C ABI for the barycenter solvers.
//!
//! Problems and reports are opaque handles created and destroyed through
//! paired functions; every fallible call returns a [`PenbaryStatus`] and
//! leaves a human-readable message retrievable with
//! [`penbary_last_error_message`]. The generated header lives in
//! `include/penbary.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use penbary::error::Error;
use penbary::fileio::{ProblemFile, ReportFile};
use penbary::objective::ProblemInstance;
use penbary::solvers::{solve, SolveReport, SolverConfig, SolverKind};
use penbary::spd::{LownerInterval, SpdMatrix};
use penbary::MeasureFamily;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenbaryStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DomainError = 3,
    NumericalError = 4,
    StepsizeFailure = 5,
    BufferTooSmall = 6,
    Utf8Error = 7,
    InternalError = 8,
}

/// Measure family selector for [`penbary_problem_create`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenbaryFamily {
    Gaussian = 0,
    QGaussian = 1,
    PhiExponential = 2,
}

/// Iteration selector mirrored from the solver crate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenbarySolverKind {
    GpmArmijo = 0,
    GpmConst = 1,
    FixedPoint = 2,
}

/// Plain-data solver options; obtain defaults from
/// [`penbary_solver_options_default`] and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PenbarySolverOptions {
    pub kind: PenbarySolverKind,
    pub tol: f64,
    pub max_iter: usize,
    pub xi: f64,
    pub sigma: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

/// Opaque handle to a validated problem.
pub struct PenbaryProblem {
    inner: ProblemInstance,
}

/// Opaque handle to a solve outcome.
pub struct PenbaryReport {
    inner: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").expect("static"));
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> PenbaryStatus {
    match err {
        Error::InvalidInput(_) => PenbaryStatus::InvalidInput,
        Error::DomainError(_) => PenbaryStatus::DomainError,
        Error::NumericalError(_) => PenbaryStatus::NumericalError,
        Error::StepsizeFailure(_) => PenbaryStatus::StepsizeFailure,
    }
}

fn guarded<F: FnOnce() -> PenbaryStatus>(body: F) -> PenbaryStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            PenbaryStatus::InternalError
        }
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn penbary_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Default solver options: Armijo gradient projection, tol 1e-8,
/// max_iter 100000, xi 0.5, sigma 0.1, box [1e-5, 1e5].
#[no_mangle]
pub extern "C" fn penbary_solver_options_default() -> PenbarySolverOptions {
    PenbarySolverOptions {
        kind: PenbarySolverKind::GpmArmijo,
        tol: 1e-8,
        max_iter: 100_000,
        xi: 0.5,
        sigma: 0.1,
        alpha_hat: 1e-5,
        beta_hat: 1e5,
    }
}

/// Builds a problem from raw arrays.
///
/// `weights` holds `count` values; `matrices` holds `count * dim * dim`
/// values, one row-major `dim x dim` block per input matrix. `q` is read only
/// for the q-Gaussian family. On success `*out` owns the problem; release it
/// with [`penbary_problem_free`].
///
/// # Safety
/// `weights` and `matrices` must point to arrays of the stated lengths, and
/// `out` must be a valid pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn penbary_problem_create(
    family: PenbaryFamily,
    q: f64,
    gamma: f64,
    dim: usize,
    count: usize,
    weights: *const f64,
    matrices: *const f64,
    out: *mut *mut PenbaryProblem,
) -> PenbaryStatus {
    guarded(|| {
        if out.is_null() || weights.is_null() || matrices.is_null() {
            set_last_error("null pointer argument");
            return PenbaryStatus::NullPointer;
        }
        let total = dim
            .checked_mul(dim)
            .and_then(|dd| dd.checked_mul(count))
            .filter(|_| dim > 0 && count > 0);
        let Some(total) = total else {
            set_last_error("dim and count must be positive and not overflow");
            return PenbaryStatus::InvalidInput;
        };
        let weights = unsafe { std::slice::from_raw_parts(weights, count) }.to_vec();
        let flat = unsafe { std::slice::from_raw_parts(matrices, total) };
        let family = match family {
            PenbaryFamily::Gaussian => MeasureFamily::Gaussian,
            PenbaryFamily::QGaussian => MeasureFamily::QGaussian { q },
            PenbaryFamily::PhiExponential => MeasureFamily::PhiExponential,
        };
        let mut mats = Vec::with_capacity(count);
        for block in flat.chunks_exact(dim * dim) {
            match SpdMatrix::from_row_major(dim, block) {
                Ok(a) => mats.push(a),
                Err(e) => {
                    set_last_error(&e.to_string());
                    return status_of(&e);
                }
            }
        }
        match ProblemInstance::new(family, mats, weights, gamma) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(PenbaryProblem { inner })) };
                PenbaryStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Builds a problem from the JSON problem-file format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn penbary_problem_from_json(
    json: *const c_char,
    out: *mut *mut PenbaryProblem,
) -> PenbaryStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return PenbaryStatus::NullPointer;
        }
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_last_error("problem JSON is not valid UTF-8");
                return PenbaryStatus::Utf8Error;
            }
        };
        match ProblemFile::from_json(text).and_then(|f| f.to_instance()) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(PenbaryProblem { inner })) };
                PenbaryStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of rows/columns of the problem's matrices.
///
/// # Safety
/// `problem` must be a live handle from a `penbary_problem_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn penbary_problem_dim(problem: *const PenbaryProblem) -> usize {
    if problem.is_null() {
        return 0;
    }
    unsafe { &*problem }.inner.dim()
}

/// Number of input matrices.
///
/// # Safety
/// `problem` must be a live handle from a `penbary_problem_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn penbary_problem_count(problem: *const PenbaryProblem) -> usize {
    if problem.is_null() {
        return 0;
    }
    unsafe { &*problem }.inner.count()
}

/// Releases a problem handle; a null pointer is a no-op.
///
/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn penbary_problem_free(problem: *mut PenbaryProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Solves the problem; on success `*out` owns a report handle.
///
/// # Safety
/// `problem` must be a live problem handle; `options` null (defaults) or
/// valid; `out` a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn penbary_solve(
    problem: *const PenbaryProblem,
    options: *const PenbarySolverOptions,
    out: *mut *mut PenbaryReport,
) -> PenbaryStatus {
    guarded(|| {
        if problem.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return PenbaryStatus::NullPointer;
        }
        let opts = if options.is_null() {
            penbary_solver_options_default()
        } else {
            unsafe { *options }
        };
        let projection_box = match LownerInterval::new(opts.alpha_hat, opts.beta_hat) {
            Ok(b) => b,
            Err(e) => {
                set_last_error(&e.to_string());
                return status_of(&e);
            }
        };
        let cfg = SolverConfig {
            kind: match opts.kind {
                PenbarySolverKind::GpmArmijo => SolverKind::GpmArmijo,
                PenbarySolverKind::GpmConst => SolverKind::GpmConst,
                PenbarySolverKind::FixedPoint => SolverKind::FixedPoint,
            },
            projection_box,
            xi: opts.xi,
            sigma: opts.sigma,
            tol: opts.tol,
            max_iter: opts.max_iter,
            x0: None,
            damping: 1.0,
        };
        match solve(&unsafe { &*problem }.inner, &cfg) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(PenbaryReport { inner })) };
                PenbaryStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Releases a report handle; a null pointer is a no-op.
///
/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_free(report: *mut PenbaryReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Dimension of the solution matrix.
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_dim(report: *const PenbaryReport) -> usize {
    if report.is_null() {
        return 0;
    }
    unsafe { &*report }.inner.x_final.dim()
}

/// Number of update steps taken.
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_iterations(report: *const PenbaryReport) -> usize {
    if report.is_null() {
        return 0;
    }
    unsafe { &*report }.inner.iterations
}

/// Frobenius norm of the optimality-equation defect at the solution.
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_residual(report: *const PenbaryReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    unsafe { &*report }.inner.residual_norm
}

/// Whether the direction norm reached the tolerance.
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_converged(report: *const PenbaryReport) -> bool {
    if report.is_null() {
        return false;
    }
    unsafe { &*report }.inner.converged
}

/// Copies the row-major `dim x dim` solution into `out` (`len` must be at
/// least `dim * dim`).
///
/// # Safety
/// `report` must be a live report handle and `out` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_solution(
    report: *const PenbaryReport,
    out: *mut f64,
    len: usize,
) -> PenbaryStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return PenbaryStatus::NullPointer;
        }
        let x = &unsafe { &*report }.inner.x_final;
        let d = x.dim();
        if len < d * d {
            set_last_error("solution buffer is too small");
            return PenbaryStatus::BufferTooSmall;
        }
        let dst = unsafe { std::slice::from_raw_parts_mut(out, d * d) };
        for i in 0..d {
            for j in 0..d {
                dst[i * d + j] = x.as_matrix()[(i, j)];
            }
        }
        PenbaryStatus::Ok
    })
}

/// Number of recorded iterations in the direction-norm trace.
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_trace_len(report: *const PenbaryReport) -> usize {
    if report.is_null() {
        return 0;
    }
    unsafe { &*report }.inner.direction_norms.len()
}

/// Copies the per-iteration direction norms into `out` (`len` must be at
/// least [`penbary_report_trace_len`]).
///
/// # Safety
/// `report` must be a live report handle and `out` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_direction_norms(
    report: *const PenbaryReport,
    out: *mut f64,
    len: usize,
) -> PenbaryStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return PenbaryStatus::NullPointer;
        }
        let trace = &unsafe { &*report }.inner.direction_norms;
        if len < trace.len() {
            set_last_error("trace buffer is too small");
            return PenbaryStatus::BufferTooSmall;
        }
        unsafe { std::slice::from_raw_parts_mut(out, trace.len()) }.copy_from_slice(trace);
        PenbaryStatus::Ok
    })
}

/// Serializes the report as JSON; release the string with
/// [`penbary_string_free`]. Returns null on failure.
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn penbary_report_to_json(report: *const PenbaryReport) -> *mut c_char {
    if report.is_null() {
        return ptr::null_mut();
    }
    let json = ReportFile::from_report(&unsafe { &*report }.inner).to_json();
    match CString::new(json) {
        Ok(s) => s.into_raw(),
        Err(_) => ptr::null_mut(),
    }
}

/// Releases a string returned by this library; a null pointer is a no-op.
///
/// # Safety
/// `s` must be null or a string obtained from [`penbary_report_to_json`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn penbary_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
