//! C interface to `qctrl`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`QctrlStatus`]; on failure [`qctrl_last_error_message`] holds a
//! description for the calling thread. Strings returned by the library must be
//! released with [`qctrl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qctrl::dynamics::{evolve, transfer_fidelity, DensityMatrix, Level, PulseSchedule, SystemParams};
use qctrl::oct::{self, Budget, OctMethod, OptimizationResult};
use qctrl::stirap::{gaussian_schedule, StirapShape};
use qctrl::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QctrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QctrlMethod {
    NelderMead = 0,
    Powell = 1,
    Lbfgsb = 2,
}

impl From<QctrlMethod> for OctMethod {
    fn from(m: QctrlMethod) -> Self {
        match m {
            QctrlMethod::NelderMead => OctMethod::NelderMead,
            QctrlMethod::Powell => OctMethod::Powell,
            QctrlMethod::Lbfgsb => OctMethod::Lbfgsb,
        }
    }
}

pub struct QctrlSystem {
    params: SystemParams,
}

pub struct QctrlSchedule {
    schedule: PulseSchedule,
}

pub struct QctrlOctResult {
    result: OptimizationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn status_of(error: &Error) -> QctrlStatus {
    match error {
        Error::InvalidParameter { .. }
        | Error::HorizonMismatch { .. }
        | Error::OutOfBounds { .. }
        | Error::EmptyBatch
        | Error::Degenerate(_) => QctrlStatus::InvalidArgument,
        Error::NonFinite(_) | Error::Corruption(_) => QctrlStatus::Numerical,
        Error::Io(_) => QctrlStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Config(_) => QctrlStatus::Parse,
    }
}

struct Failure(QctrlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QctrlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> QctrlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => QctrlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            QctrlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(text: String) -> Result<*mut c_char, Failure> {
    CString::new(text)
        .map(CString::into_raw)
        .map_err(|_| Failure(QctrlStatus::InvalidArgument, "string contains NUL".into()))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qctrl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qctrl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qctrl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Resonant system with `T = 1` given by `(Tγ, TΩ_max)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_system_new(t_gamma: f64, t_omega_max: f64, out: *mut *mut QctrlSystem) -> QctrlStatus {
    guard(|| {
        let params = SystemParams::dimensionless(t_gamma, t_omega_max)?;
        write_out(out, Box::into_raw(Box::new(QctrlSystem { params })))
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_system_new_full(
    delta_p: f64,
    delta_3: f64,
    gamma: f64,
    t_final: f64,
    omega_max: f64,
    out: *mut *mut QctrlSystem,
) -> QctrlStatus {
    guard(|| {
        let params = SystemParams::new(delta_p, delta_3, gamma, t_final, omega_max)?;
        write_out(out, Box::into_raw(Box::new(QctrlSystem { params })))
    })
}

/// # Safety
/// `system` must come from `qctrl_system_new*` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qctrl_system_free(system: *mut QctrlSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Step-function schedule from `n` pump and `n` Stokes values.
///
/// # Safety
/// `pump` and `stokes` must point to `n` doubles; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_schedule_piecewise_constant(
    horizon: f64,
    pump: *const f64,
    stokes: *const f64,
    n: usize,
    out: *mut *mut QctrlSchedule,
) -> QctrlStatus {
    guard(|| {
        let pump = slice(pump, n, "pump")?.to_vec();
        let stokes = slice(stokes, n, "stokes")?.to_vec();
        let schedule = PulseSchedule::piecewise_constant(horizon, pump, stokes)?;
        write_out(out, Box::into_raw(Box::new(QctrlSchedule { schedule })))
    })
}

/// Reference Gaussian STIRAP pair for `system`, sampled on `n_segments`
/// steps.
///
/// # Safety
/// `system` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_schedule_stirap(
    system: *const QctrlSystem,
    n_segments: usize,
    out: *mut *mut QctrlSchedule,
) -> QctrlStatus {
    guard(|| {
        let params = &deref(system, "system")?.params;
        let schedule = gaussian_schedule(&StirapShape::default_for(params), params, n_segments)?;
        write_out(out, Box::into_raw(Box::new(QctrlSchedule { schedule })))
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_schedule_from_json(json: *const c_char, out: *mut *mut QctrlSchedule) -> QctrlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(QctrlStatus::Parse, e.to_string()))?;
        let schedule: PulseSchedule = serde_json::from_str(text).map_err(Error::from)?;
        write_out(out, Box::into_raw(Box::new(QctrlSchedule { schedule })))
    })
}

/// Serializes the schedule; free the result with [`qctrl_string_free`].
///
/// # Safety
/// `schedule` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_schedule_to_json(schedule: *const QctrlSchedule, out: *mut *mut c_char) -> QctrlStatus {
    guard(|| {
        let schedule = &deref(schedule, "schedule")?.schedule;
        let text = serde_json::to_string(schedule).map_err(Error::from)?;
        write_out(out, into_c_string(text)?)
    })
}

/// Number of segments, or 0 for a null handle.
///
/// # Safety
/// `schedule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qctrl_schedule_segments(schedule: *const QctrlSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.schedule.n_segments())
}

/// # Safety
/// `schedule` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qctrl_schedule_free(schedule: *mut QctrlSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Final population of `|r⟩` after evolving `|g⟩`.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_transfer_fidelity(
    system: *const QctrlSystem,
    schedule: *const QctrlSchedule,
    out: *mut f64,
) -> QctrlStatus {
    guard(|| {
        let params = &deref(system, "system")?.params;
        let schedule = &deref(schedule, "schedule")?.schedule;
        write_out(out, transfer_fidelity(schedule, params)?)
    })
}

/// Writes populations `(g, e, r, s)` at each of the `N + 1` segment
/// boundaries into `out`, which must hold `4 (N + 1)` doubles.
///
/// # Safety
/// Handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qctrl_populations(
    system: *const QctrlSystem,
    schedule: *const QctrlSchedule,
    out: *mut f64,
    len: usize,
) -> QctrlStatus {
    guard(|| {
        let params = &deref(system, "system")?.params;
        let schedule = &deref(schedule, "schedule")?.schedule;
        let needed = 4 * (schedule.n_segments() + 1);
        if len < needed {
            return Err(Failure(
                QctrlStatus::InvalidArgument,
                format!("buffer holds {len} values, {needed} needed"),
            ));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        let trajectory = evolve(&DensityMatrix::pure(Level::G), schedule, params)?;
        let buffer = std::slice::from_raw_parts_mut(out, needed);
        for (chunk, state) in buffer.chunks_exact_mut(4).zip(&trajectory) {
            chunk.copy_from_slice(&state.populations());
        }
        Ok(())
    })
}

/// Best of `restarts` seeded optimizations over `n_segments` steps per
/// control. A `budget` of 0 selects the default evaluation limit.
///
/// # Safety
/// `system` must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_oct_run(
    system: *const QctrlSystem,
    n_segments: usize,
    method: QctrlMethod,
    restarts: usize,
    seed: u64,
    budget: usize,
    out: *mut *mut QctrlOctResult,
) -> QctrlStatus {
    guard(|| {
        let params = &deref(system, "system")?.params;
        let budget = if budget == 0 { Budget::default() } else { Budget::evaluations(budget) };
        let result = oct::multistart(params, n_segments, method.into(), restarts, seed, budget)?;
        write_out(out, Box::into_raw(Box::new(QctrlOctResult { result })))
    })
}

/// # Safety
/// `result` must be live; `cost` and `fidelity` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_oct_result_cost(
    result: *const QctrlOctResult,
    cost: *mut f64,
    fidelity: *mut f64,
) -> QctrlStatus {
    guard(|| {
        let r = &deref(result, "result")?.result;
        write_out(cost, r.best_cost)?;
        write_out(fidelity, r.fidelity)
    })
}

/// Copies the `2N` optimized step heights (pump then Stokes) into `out`.
///
/// # Safety
/// `result` must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qctrl_oct_result_alpha(result: *const QctrlOctResult, out: *mut f64, len: usize) -> QctrlStatus {
    guard(|| {
        let alpha = &deref(result, "result")?.result.best_alpha.alpha;
        if len < alpha.len() {
            return Err(Failure(
                QctrlStatus::InvalidArgument,
                format!("buffer holds {len} values, {} needed", alpha.len()),
            ));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        std::slice::from_raw_parts_mut(out, alpha.len()).copy_from_slice(alpha);
        Ok(())
    })
}

/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_oct_result_schedule(
    result: *const QctrlOctResult,
    system: *const QctrlSystem,
    out: *mut *mut QctrlSchedule,
) -> QctrlStatus {
    guard(|| {
        let r = &deref(result, "result")?.result;
        let params = &deref(system, "system")?.params;
        let schedule = r.schedule(params)?;
        write_out(out, Box::into_raw(Box::new(QctrlSchedule { schedule })))
    })
}

/// # Safety
/// `result` must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qctrl_oct_result_to_json(result: *const QctrlOctResult, out: *mut *mut c_char) -> QctrlStatus {
    guard(|| {
        let r = &deref(result, "result")?.result;
        let text = serde_json::to_string(r).map_err(Error::from)?;
        write_out(out, into_c_string(text)?)
    })
}

/// # Safety
/// `result` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qctrl_oct_result_free(result: *mut QctrlOctResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
