//! C ABI over the laboratory: run experiment configs, evaluate weights and metrics.
//!
//! Every function returns an [`MlStatus`]; on failure the message is available from
//! [`ml_last_error`] on the same thread. Handles are opaque and freed by their `_free` function.
//! Strings returned through `char **` are owned by the caller and released with [`ml_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use morrey_lab::geometry::{rho, varrho, SpaceTimePoint};
use morrey_lab::harness::{self, ExperimentConfig, RunReport};
use morrey_lab::weights::{check_condition_a, check_condition_b, CheckSettings, WeightFunction};
use morrey_lab::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    BudgetExceeded = 5,
    UnknownEntry = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

/// Which tail-integral condition to check.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlCondition {
    A = 0,
    B = 1,
}

/// A finished experiment report.
pub struct MlReport {
    report: RunReport,
}

/// A weight function `φ(x, r)`.
pub struct MlWeight {
    weight: WeightFunction,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MlStatus {
    match e.root() {
        Error::Config(_) => MlStatus::Config,
        Error::BudgetExceeded { .. } => MlStatus::BudgetExceeded,
        Error::UnknownCatalogEntry(_) => MlStatus::UnknownEntry,
        Error::LinearSolve(_) | Error::Inconsistent(_) => MlStatus::Numerical,
        Error::Io(_) => MlStatus::Io,
        _ => MlStatus::InvalidArgument,
    }
}

struct Fail(MlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MlStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MlStatus::NullPointer, format!("`{what}` is NULL"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MlStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|_| Fail(MlStatus::InvalidArgument, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn read_point(coords: *const f64, len: usize) -> Result<SpaceTimePoint, Fail> {
    if coords.is_null() {
        return Err(null("coords"));
    }
    Ok(SpaceTimePoint::from_coords(std::slice::from_raw_parts(coords, len))?)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn ml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The catalog listing (manufactured problems, weight and kernel families, batteries).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_catalog(out: *mut *mut c_char) -> MlStatus {
    guard(|| write_string(out, harness::list_catalog()))
}

/// Parses a TOML config and runs it. When `override_seed` is nonzero `seed` replaces the
/// config's seed. Nothing is written to disk.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_run_config(
    config_toml: *const c_char,
    override_seed: c_int,
    seed: u64,
    out: *mut *mut MlReport,
) -> MlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = ExperimentConfig::from_toml(read_str(config_toml, "config_toml")?)?;
        if override_seed != 0 {
            cfg.seed = seed;
        }
        let report = harness::run(&cfg)?;
        *out = Box::into_raw(Box::new(MlReport { report }));
        Ok(())
    })
}

/// Whether every check passed (1) or not (0).
///
/// # Safety
/// `report` must be a live handle and `passed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_report_passed(report: *const MlReport, passed: *mut c_int) -> MlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let p = passed.as_mut().ok_or_else(|| null("passed"))?;
        *p = c_int::from(r.report.passed);
        Ok(())
    })
}

/// Number of checks in the report.
///
/// # Safety
/// `report` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_report_check_count(report: *const MlReport, count: *mut usize) -> MlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        *count.as_mut().ok_or_else(|| null("count"))? = r.report.checks.len();
        Ok(())
    })
}

/// Name and verdict of check `index`; the name is caller-owned.
///
/// # Safety
/// `report` must be a live handle; `name` and `passed` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ml_report_check(
    report: *const MlReport,
    index: usize,
    name: *mut *mut c_char,
    passed: *mut c_int,
) -> MlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let c = r.report.checks.get(index).ok_or_else(|| {
            Fail(MlStatus::InvalidArgument, format!("check index {index} out of range"))
        })?;
        let p = passed.as_mut().ok_or_else(|| null("passed"))?;
        write_string(name, c.name.clone())?;
        *p = c_int::from(c.passed);
        Ok(())
    })
}

/// The report as JSON; with `canonical` nonzero the wall-clock field is zeroed.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_report_json(report: *const MlReport, canonical: c_int, out: *mut *mut c_char) -> MlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let json = if canonical != 0 {
            r.report.canonical_json()?
        } else {
            r.report.to_json()?
        };
        write_string(out, json)
    })
}

/// # Safety
/// `report` must come from [`ml_run_config`] and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ml_report_free(report: *mut MlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// `φ(x, r) = r^{β - (n+2)/p}`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_weight_power(n: usize, p: f64, beta: f64, out: *mut *mut MlWeight) -> MlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let weight = WeightFunction::power(n, p, beta)?;
        *out = Box::into_raw(Box::new(MlWeight { weight }));
        Ok(())
    })
}

/// A weight given by an expression in `x1..xn, t, r`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_weight_expression(
    n: usize,
    p: f64,
    source: *const c_char,
    out: *mut *mut MlWeight,
) -> MlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let weight = WeightFunction::expression(n, p, read_str(source, "source")?)?;
        *out = Box::into_raw(Box::new(MlWeight { weight }));
        Ok(())
    })
}

/// `φ(x, r)` with `x` given as `n + 1` coordinates (space, then time).
///
/// # Safety
/// `weight` must be a live handle, `coords` must hold `len` values, `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ml_weight_eval(
    weight: *const MlWeight,
    coords: *const f64,
    len: usize,
    r: f64,
    value: *mut f64,
) -> MlStatus {
    guard(|| {
        let w = weight.as_ref().ok_or_else(|| null("weight"))?;
        let x = read_point(coords, len)?;
        if x.dim() != w.weight.dim() {
            return Err(Fail(MlStatus::InvalidArgument, "point and weight differ in dimension".into()));
        }
        *value.as_mut().ok_or_else(|| null("value"))? = w.weight.checked(&x, r)?;
        Ok(())
    })
}

/// Witnessed constant of a condition at `x = 0`, radii `1e-2 · 2^k`, `k = 0..9`.
/// `divergent` is set to 1 (and `constant` to infinity) when the tail integral diverges.
///
/// # Safety
/// `weight` must be a live handle; `constant` and `divergent` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ml_weight_check(
    weight: *const MlWeight,
    condition: MlCondition,
    constant: *mut f64,
    divergent: *mut c_int,
) -> MlStatus {
    guard(|| {
        let w = weight.as_ref().ok_or_else(|| null("weight"))?;
        let c = constant.as_mut().ok_or_else(|| null("constant"))?;
        let d = divergent.as_mut().ok_or_else(|| null("divergent"))?;
        let radii: Vec<f64> = (0..9).map(|k| 1e-2 * 2f64.powi(k)).collect();
        let x = [SpaceTimePoint::origin(w.weight.dim())];
        let set = CheckSettings::for_radii(&radii);
        let rep = match condition {
            MlCondition::A => check_condition_a(&w.weight, &x, &radii, &set)?,
            MlCondition::B => check_condition_b(&w.weight, &x, &radii, &set)?,
        };
        *c = rep.constant.value().unwrap_or(f64::INFINITY);
        *d = c_int::from(!rep.passes());
        Ok(())
    })
}

/// # Safety
/// `weight` must come from a `ml_weight_*` constructor and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ml_weight_free(weight: *mut MlWeight) {
    if !weight.is_null() {
        drop(Box::from_raw(weight));
    }
}

/// The parabolic metrics `ρ` (`rho`) and `ϱ` (`varrho`) of a point given as `n + 1` coordinates.
///
/// # Safety
/// `coords` must hold `len` values; `rho_out` and `varrho_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ml_metrics(coords: *const f64, len: usize, rho_out: *mut f64, varrho_out: *mut f64) -> MlStatus {
    guard(|| {
        let x = read_point(coords, len)?;
        *rho_out.as_mut().ok_or_else(|| null("rho_out"))? = rho(&x);
        *varrho_out.as_mut().ok_or_else(|| null("varrho_out"))? = varrho(&x);
        Ok(())
    })
}
