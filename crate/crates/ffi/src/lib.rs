//! C ABI for codiffsp.
//!
//! Problems live behind an opaque [`CspProblem`] handle created from JSON.
//! Every fallible call returns a [`CspStatus`]; on failure the message is
//! available from [`csp_last_error_message`] on the same thread. Strings
//! returned through out-parameters are owned by the caller and must be
//! released with [`csp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use codiffsp::generate::{generate, SizeSpec};
use codiffsp::optimality::check_optimality;
use codiffsp::penalty::{check_nondegeneracy, phi_c, phi_l1, PenaltySpec};
use codiffsp::solvers::{codiff_descent, dca_solve, SolveOptions};
use codiffsp::{expectation, Error, Point, TwoStageProblem};

/// Opaque problem handle.
pub struct CspProblem {
    inner: TwoStageProblem,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    DimMismatch = 4,
    ProbSum = 5,
    ProbNonpositive = 6,
    DcNotConvex = 7,
    NotPsd = 8,
    InvalidSet = 9,
    InvalidValue = 10,
    Nonfinite = 11,
    VertexCap = 12,
    Inconsistent = 13,
    Unprojectable = 14,
    NotDc = 15,
    NotSmooth = 16,
    InfeasibleCandidate = 17,
    Io = 18,
    /// The solver stopped without converging; the report is still returned.
    NotConverged = 19,
    Panic = 20,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CspSolver {
    Dca = 0,
    Descent = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CspStatus {
    match e {
        Error::Parse { .. } => CspStatus::Parse,
        Error::DimMismatch { .. } => CspStatus::DimMismatch,
        Error::ProbSum { .. } => CspStatus::ProbSum,
        Error::ProbNonPositive { .. } => CspStatus::ProbNonpositive,
        Error::DcNotConvex { .. } => CspStatus::DcNotConvex,
        Error::NotPsd { .. } => CspStatus::NotPsd,
        Error::InvalidSet(_) => CspStatus::InvalidSet,
        Error::InvalidValue(_) => CspStatus::InvalidValue,
        Error::NonFinite { .. } => CspStatus::Nonfinite,
        Error::VertexCap { .. } => CspStatus::VertexCap,
        Error::Inconsistent(_) => CspStatus::Inconsistent,
        Error::Unprojectable(_) => CspStatus::Unprojectable,
        Error::NotDc(_) => CspStatus::NotDc,
        Error::NotSmooth(_) => CspStatus::NotSmooth,
        Error::InfeasibleCandidate { .. } => CspStatus::InfeasibleCandidate,
        Error::Io(_) => CspStatus::Io,
    }
}

enum Failure {
    Status(CspStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<CspStatus, Failure>) -> CspStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure::Lib(e))) => {
            set_error(format!("{}: {e}", e.code()));
            status_of(&e)
        }
        Ok(Err(Failure::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CspStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Status(CspStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: the caller passes a valid NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::Status(CspStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn problem<'a>(p: *const CspProblem) -> Result<&'a TwoStageProblem, Failure> {
    if p.is_null() {
        return Err(Failure::Status(CspStatus::NullPointer, "problem handle is null".into()));
    }
    // SAFETY: non-null handles come from this library and are still alive.
    Ok(unsafe { &(*p).inner })
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::Status(CspStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    check_out(out)?;
    let c = CString::new(s).map_err(|_| Failure::Status(CspStatus::Inconsistent, "interior NUL in output".into()))?;
    // SAFETY: `out` is non-null and points to writable storage.
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn parse_point(text: &str) -> Result<Point, Failure> {
    Ok(Point::from_json(text)?)
}

/// Parses and validates a problem. On success `*out` owns a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csp_problem_from_json(json: *const c_char, out: *mut *mut CspProblem) -> CspStatus {
    guard(|| {
        check_out(out)?;
        let text = unsafe { read_str(json, "json") }?;
        let inner = TwoStageProblem::from_json(text)?;
        let handle = Box::into_raw(Box::new(CspProblem { inner }));
        unsafe { *out = handle };
        Ok(CspStatus::Ok)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `problem` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn csp_problem_free(problem: *mut CspProblem) {
    if !problem.is_null() {
        // SAFETY: the handle was created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Serializes a problem to JSON.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csp_problem_to_json(problem: *const CspProblem, out: *mut *mut c_char) -> CspStatus {
    guard(|| {
        let p = unsafe { self::problem(problem) }?;
        unsafe { write_string(out, p.to_json()) }?;
        Ok(CspStatus::Ok)
    })
}

/// Generates a random instance. `dc` and `smooth` are treated as booleans.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csp_generate(
    seed: u64,
    d: usize,
    m: usize,
    scenarios: usize,
    constraints: usize,
    dc: bool,
    smooth: bool,
    out: *mut *mut CspProblem,
) -> CspStatus {
    guard(|| {
        check_out(out)?;
        let mut spec = SizeSpec::new(d, m, scenarios, constraints, dc);
        spec.smooth = smooth;
        let inner = generate(seed, spec)?;
        unsafe { *out = Box::into_raw(Box::new(CspProblem { inner })) };
        Ok(CspStatus::Ok)
    })
}

/// Objective, `ℓ¹` penalty term and penalty function value at a point.
///
/// # Safety
/// `problem` must be a live handle, `point_json` a NUL-terminated string and
/// the three outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn csp_eval(
    problem: *const CspProblem,
    point_json: *const c_char,
    c: f64,
    objective: *mut f64,
    phi: *mut f64,
    penalty_value: *mut f64,
) -> CspStatus {
    guard(|| {
        let p = unsafe { self::problem(problem) }?;
        check_out(objective)?;
        check_out(phi)?;
        check_out(penalty_value)?;
        let z = parse_point(unsafe { read_str(point_json, "point_json") }?)?;
        let i = expectation::eval_i(p, &z)?;
        let f = if p.g.is_empty() { 0.0 } else { phi_l1(p, &z)? };
        let v = phi_c(p, PenaltySpec::l1(c), &z)?;
        unsafe {
            *objective = i;
            *phi = f;
            *penalty_value = v;
        }
        Ok(CspStatus::Ok)
    })
}

/// Minimizes the `ℓ¹` penalty function. `start_json` may be null for the
/// origin projected onto the first-stage set. The JSON report is written to
/// `*report` also when the status is `NotConverged`.
///
/// # Safety
/// `problem` must be a live handle, `start_json` null or a NUL-terminated
/// string, and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csp_solve(
    problem: *const CspProblem,
    solver: CspSolver,
    c: f64,
    start_json: *const c_char,
    report: *mut *mut c_char,
) -> CspStatus {
    guard(|| {
        let p = unsafe { self::problem(problem) }?;
        check_out(report)?;
        let z0 = if start_json.is_null() {
            let mut z = Point::zeros(p.d, p.m, p.num_scenarios());
            z.x = p.first_stage.project(&z.x);
            z
        } else {
            parse_point(unsafe { read_str(start_json, "start_json") }?)?
        };
        let opts = SolveOptions::default();
        let rep = match solver {
            CspSolver::Dca => dca_solve(p, c, &z0, &opts)?,
            CspSolver::Descent => codiff_descent(p, c, &z0, &opts)?,
        };
        let ok = rep.status.is_success();
        let status = format!("{:?}", rep.status);
        unsafe { write_string(report, serde_json::to_string(&rep).expect("report serializes")) }?;
        if ok {
            Ok(CspStatus::Ok)
        } else {
            set_error(format!("solver stopped with status {status}"));
            Ok(CspStatus::NotConverged)
        }
    })
}

/// Optimality certificate at a feasible point, as JSON.
///
/// # Safety
/// `problem` must be a live handle, `point_json` a NUL-terminated string and
/// `certificate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csp_certify(
    problem: *const CspProblem,
    c: f64,
    point_json: *const c_char,
    certificate: *mut *mut c_char,
) -> CspStatus {
    guard(|| {
        let p = unsafe { self::problem(problem) }?;
        check_out(certificate)?;
        let z = parse_point(unsafe { read_str(point_json, "point_json") }?)?;
        let cert = check_optimality(p, c, &z, None)?;
        unsafe { write_string(certificate, cert.to_json()) }?;
        Ok(CspStatus::Ok)
    })
}

/// Sampled nondegeneracy report, as JSON.
///
/// # Safety
/// `problem` must be a live handle and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csp_check_nondeg(
    problem: *const CspProblem,
    samples: usize,
    seed: u64,
    report: *mut *mut c_char,
) -> CspStatus {
    guard(|| {
        let p = unsafe { self::problem(problem) }?;
        check_out(report)?;
        let rep = check_nondegeneracy(p, samples, seed)?;
        unsafe { write_string(report, serde_json::to_string(&rep).expect("report serializes")) }?;
        Ok(CspStatus::Ok)
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn csp_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string was created by `CString::into_raw`.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn csp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
