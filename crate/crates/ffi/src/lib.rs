//! C interface. Models and traces are opaque handles owned by the caller
//! and released with the matching `*_free` function. Every fallible call
//! returns a [`CbdStatus`]; the message for the last failure on the calling
//! thread is available from [`cbd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use diraccbd::analysis::{finite_difference_table, max_magnitude};
use diraccbd::blocks::Mode;
use diraccbd::graph::{simulate, Model, SimConfig, Trace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ModelError = 3,
    SimulationError = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbdMode {
    Symbolic = 0,
    Numerical = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbdMagnitude {
    pub value: f64,
    pub printed_formula: f64,
    pub overflow_risk: bool,
}

/// Simulation settings; fill with [`cbd_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbdConfig {
    pub mode: CbdMode,
    pub step: f64,
    pub end_time: f64,
    pub zc_tol: f64,
    pub min_step: f64,
}

pub struct CbdModel {
    model: Model,
}

pub struct CbdTrace {
    trace: Trace,
    names: Vec<CString>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbdImpulse {
    pub time: f64,
    /// Index into the trace's signals.
    pub signal: usize,
    pub order: u32,
    pub coefficient: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn guard(f: impl FnOnce() -> Result<(), (CbdStatus, String)>) -> CbdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CbdStatus::Panic
        }
    }
}

fn null(what: &str) -> (CbdStatus, String) {
    (CbdStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CbdStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (CbdStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (CbdStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn cbd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cbd_config_default(mode: CbdMode, step: f64, end_time: f64) -> CbdConfig {
    let d = SimConfig::new(Mode::Symbolic, step, end_time);
    CbdConfig {
        mode,
        step,
        end_time,
        zc_tol: d.zc_tol,
        min_step: d.h_min,
    }
}

/// Parses and validates model source text.
///
/// # Safety
/// `source` must be a NUL-terminated string; `model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbd_model_load(
    source: *const c_char,
    model: *mut *mut CbdModel,
) -> CbdStatus {
    guard(|| {
        let slot = out(model, "model")?;
        *slot = ptr::null_mut();
        let src = text(source, "source")?;
        let m =
            diraccbd::dsl::load(src).map_err(|e| (CbdStatus::ModelError, e.render("<source>")))?;
        *slot = Box::into_raw(Box::new(CbdModel { model: m }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`cbd_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbd_model_free(model: *mut CbdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs definition `top` of `model`, watching its declared outputs.
///
/// # Safety
/// `model` must be a live handle, `top` a NUL-terminated string, `config`
/// and `trace` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cbd_simulate(
    model: *const CbdModel,
    top: *const c_char,
    config: *const CbdConfig,
    trace: *mut *mut CbdTrace,
) -> CbdStatus {
    guard(|| {
        let slot = out(trace, "trace")?;
        *slot = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let top = text(top, "top")?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let mode = match c.mode {
            CbdMode::Symbolic => Mode::Symbolic,
            CbdMode::Numerical => Mode::Numerical,
        };
        let mut cfg = SimConfig::new(mode, c.step, c.end_time);
        cfg.zc_tol = c.zc_tol;
        cfg.h_min = c.min_step;
        let tr = simulate(&m.model, top, &cfg)
            .map_err(|e| (CbdStatus::SimulationError, e.to_string()))?;
        let names = tr
            .signals
            .iter()
            .map(|s| CString::new(s.as_str()).unwrap_or_default())
            .collect();
        *slot = Box::into_raw(Box::new(CbdTrace { trace: tr, names }));
        Ok(())
    })
}

/// # Safety
/// `trace` must come from [`cbd_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cbd_trace_free(trace: *mut CbdTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of committed steps, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbd_trace_steps(trace: *const CbdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.len())
}

/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbd_trace_signal_count(trace: *const CbdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.names.len())
}

/// Name of signal `index`, owned by the trace; null when out of range.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbd_trace_signal_name(
    trace: *const CbdTrace,
    index: usize,
) -> *const c_char {
    trace
        .as_ref()
        .and_then(|t| t.names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Time and left/right limits of signal `signal` at step `step`.
///
/// # Safety
/// `trace` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbd_trace_sample(
    trace: *const CbdTrace,
    signal: usize,
    step: usize,
    time: *mut f64,
    left: *mut f64,
    right: *mut f64,
) -> CbdStatus {
    guard(|| {
        let t = &trace.as_ref().ok_or_else(|| null("trace"))?.trace;
        let (time, left, right) = (out(time, "time")?, out(left, "left")?, out(right, "right")?);
        let s = t
            .samples
            .get(signal)
            .and_then(|col| col.get(step))
            .ok_or_else(|| {
                (
                    CbdStatus::OutOfRange,
                    format!("no sample for signal {signal} at step {step}"),
                )
            })?;
        *time = t.times[step];
        *left = s.left;
        *right = s.right;
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cbd_trace_impulse_count(trace: *const CbdTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.impulses.len())
}

/// # Safety
/// `trace` must be a live handle and `impulse` writable.
#[no_mangle]
pub unsafe extern "C" fn cbd_trace_impulse(
    trace: *const CbdTrace,
    index: usize,
    impulse: *mut CbdImpulse,
) -> CbdStatus {
    guard(|| {
        let t = &trace.as_ref().ok_or_else(|| null("trace"))?.trace;
        let slot = out(impulse, "impulse")?;
        let e = t
            .impulses
            .get(index)
            .ok_or_else(|| (CbdStatus::OutOfRange, format!("no impulse {index}")))?;
        *slot = CbdImpulse {
            time: e.time,
            signal: t.signal_index(&e.signal).unwrap_or(usize::MAX),
            order: e.order,
            coefficient: e.coefficient,
        };
        Ok(())
    })
}

/// Finite-difference table of a unit step, row-major with `order + 1`
/// columns and `order + 2` rows starting one step before the jump.
/// `written` receives the number of values needed; when `capacity` is too
/// small nothing is copied and `CBD_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `values` must hold `capacity` doubles (it may be null when `capacity`
/// is 0); `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbd_difference_table(
    order: u32,
    step: f64,
    values: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> CbdStatus {
    guard(|| {
        let written = out(written, "written")?;
        if order > 64 || !(step.is_finite() && step > 0.0) {
            return Err((
                CbdStatus::OutOfRange,
                "order must be at most 64 and step positive".into(),
            ));
        }
        let t = finite_difference_table(order, step);
        let flat: Vec<f64> = t.values.concat();
        *written = flat.len();
        if capacity < flat.len() {
            return Err((
                CbdStatus::BufferTooSmall,
                format!("need {} values, have {capacity}", flat.len()),
            ));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), values, flat.len());
        Ok(())
    })
}

/// Largest value an order-`order` numerical derivative reaches for a jump
/// of size `jump`. On an internal failure both values are NaN and `overflow_risk` is set.
#[no_mangle]
pub extern "C" fn cbd_max_magnitude(order: u32, step: f64, jump: f64) -> CbdMagnitude {
    catch_unwind(|| max_magnitude(order, step, jump)).map_or(
        CbdMagnitude {
            value: f64::NAN,
            printed_formula: f64::NAN,
            overflow_risk: true,
        },
        |m| CbdMagnitude {
            value: m.value,
            printed_formula: m.printed_formula,
            overflow_risk: m.overflow_risk,
        },
    )
}
