//! C interface to `destimate`.
//!
//! Every fallible call returns a [`DestStatus`]. On failure the message is
//! available from [`dest_last_error_message`] on the same thread until the
//! next failing call. Handles are opaque and owned by the caller, who
//! releases them with the matching `_free` function. Strings returned through
//! out-parameters are released with [`dest_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use destimate::netsim::{self, SimulationTrace};
use destimate::synth::{self, EstimatorFile, SynthesisReport};
use destimate::{cli, fixtures, DistributedEstimator, Error, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DestStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    DimensionMismatch = 4,
    Precondition = 5,
    Topology = 6,
    NotDetectable = 7,
    SynthesisFailure = 8,
    NumericFailure = 9,
    NonFinite = 10,
    Internal = 11,
    Io = 12,
    OutOfRange = 13,
    Panic = 14,
}

/// Plant, graph and run settings.
pub struct DestScenario {
    inner: Scenario,
}

/// Synthesized or loaded distributed estimator.
pub struct DestEstimator {
    est: DistributedEstimator,
    report: Option<SynthesisReport>,
}

pub struct DestTrace {
    inner: SimulationTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Fail = (DestStatus, String);

fn status_of(e: &Error) -> DestStatus {
    match e {
        Error::NumericFailure(_) => DestStatus::NumericFailure,
        Error::Precondition(_) => DestStatus::Precondition,
        Error::DimensionMismatch(_) => DestStatus::DimensionMismatch,
        Error::Topology(_) => DestStatus::Topology,
        Error::NotDetectable { .. } => DestStatus::NotDetectable,
        Error::SynthesisFailure(_) => DestStatus::SynthesisFailure,
        Error::InternalInconsistency(_) => DestStatus::Internal,
        Error::NonFinite { .. } => DestStatus::NonFinite,
        Error::Parse(_) => DestStatus::Parse,
        Error::Io(_) => DestStatus::Io,
    }
}

fn core(e: Error) -> Fail {
    (status_of(&e), e.to_string())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|s| *s.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DestStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DestStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DestStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err((DestStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|e| (DestStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| (DestStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err((DestStatus::NullPointer, format!("{what} is null")));
    }
    out.write(v);
    Ok(())
}

fn to_c(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|e| (DestStatus::Internal, e.to_string()))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dest_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dest_last_error_message() -> *const c_char {
    LAST_ERROR.with(|s| s.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn dest_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a scenario document.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_scenario_from_json(json: *const c_char, out: *mut *mut DestScenario) -> DestStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let sc = Scenario::from_json(text).map_err(core)?;
        put(out, boxed(DestScenario { inner: sc }), "out")
    })
}

/// The built-in two-sensor demo scenario.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_scenario_demo(out: *mut *mut DestScenario) -> DestStatus {
    guard(|| put(out, boxed(DestScenario { inner: fixtures::demo() }), "out"))
}

/// # Safety
/// `sc` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dest_scenario_free(sc: *mut DestScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// State, input, functional and node counts. Any out-pointer may be NULL.
///
/// # Safety
/// `sc` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_scenario_dims(
    sc: *const DestScenario,
    n: *mut usize,
    m: *mut usize,
    r: *mut usize,
    l: *mut usize,
) -> DestStatus {
    guard(|| {
        let p = &get(sc, "scenario")?.inner.plant;
        for (o, v) in [(n, p.n()), (m, p.m()), (r, p.r()), (l, p.l())] {
            if !o.is_null() {
                o.write(v);
            }
        }
        Ok(())
    })
}

/// Structural analysis. `detectable` receives 1 when the plant is jointly
/// partially detectable and the graph is admissible. `report_json` may be
/// NULL; otherwise it receives the full report.
///
/// # Safety
/// `sc` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_analyze(
    sc: *const DestScenario,
    detectable: *mut c_int,
    report_json: *mut *mut c_char,
) -> DestStatus {
    guard(|| {
        let rep = cli::analyze(&get(sc, "scenario")?.inner).map_err(core)?;
        put(detectable, c_int::from(rep.ok), "detectable")?;
        if !report_json.is_null() {
            let text = serde_json::to_string_pretty(&rep).map_err(|e| (DestStatus::Internal, e.to_string()))?;
            report_json.write(to_c(text)?);
        }
        Ok(())
    })
}

/// Distributed synthesis. Pass NaN as `gamma` to use the scenario setting
/// or the computed bound.
///
/// # Safety
/// `sc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_synthesize(sc: *const DestScenario, gamma: f64, out: *mut *mut DestEstimator) -> DestStatus {
    guard(|| {
        let sc = &get(sc, "scenario")?.inner;
        let mut opts = sc.synthesis;
        if !gamma.is_nan() {
            opts.gamma = Some(gamma);
        }
        let (est, rep) = synth::synth_distributed(&sc.plant, &sc.graph, &opts).map_err(core)?;
        put(out, boxed(DestEstimator { est, report: Some(rep) }), "out")
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_estimator_from_json(json: *const c_char, out: *mut *mut DestEstimator) -> DestStatus {
    guard(|| {
        let est = EstimatorFile::parse(read_str(json, "json")?).and_then(|f| f.to_estimator()).map_err(core)?;
        put(out, boxed(DestEstimator { est, report: None }), "out")
    })
}

/// # Safety
/// `est` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_estimator_to_json(est: *const DestEstimator, out: *mut *mut c_char) -> DestStatus {
    guard(|| {
        let e = get(est, "estimator")?;
        put(out, to_c(EstimatorFile::new(&e.est, e.report.as_ref()).to_json())?, "out")
    })
}

/// # Safety
/// `est` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_estimator_info(est: *const DestEstimator, q: *mut usize, gamma: *mut f64) -> DestStatus {
    guard(|| {
        let e = &get(est, "estimator")?.est;
        if !q.is_null() {
            q.write(e.q());
        }
        if !gamma.is_null() {
            gamma.write(e.gamma);
        }
        Ok(())
    })
}

/// # Safety
/// `est` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dest_estimator_free(est: *mut DestEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Simulates the scenario's run settings. Non-positive or NaN `t_end` and
/// `dt` keep the scenario values.
///
/// # Safety
/// `sc` and `est` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_simulate(
    sc: *const DestScenario,
    est: *const DestEstimator,
    t_end: f64,
    dt: f64,
    out: *mut *mut DestTrace,
) -> DestStatus {
    guard(|| {
        let sc = &get(sc, "scenario")?.inner;
        let est = &get(est, "estimator")?.est;
        let mut cfg = sc
            .simulation
            .clone()
            .ok_or_else(|| (DestStatus::Parse, "scenario has no simulation section".to_string()))?;
        if t_end > 0.0 {
            cfg.t_end = t_end;
        }
        if dt > 0.0 {
            cfg.dt = dt;
        }
        let tr = netsim::simulate(&sc.plant, est, &sc.graph, &cfg).map_err(core)?;
        put(out, boxed(DestTrace { inner: tr }), "out")
    })
}

/// Number of samples and nodes. Either out-pointer may be NULL.
///
/// # Safety
/// `tr` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_trace_size(tr: *const DestTrace, samples: *mut usize, nodes: *mut usize) -> DestStatus {
    guard(|| {
        let t = &get(tr, "trace")?.inner;
        if !samples.is_null() {
            samples.write(t.len());
        }
        if !nodes.is_null() {
            nodes.write(t.l());
        }
        Ok(())
    })
}

/// Time and `‖eᵢ‖` of node `node` at sample `k`. Either out-pointer may be
/// NULL.
///
/// # Safety
/// `tr` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_trace_sample(
    tr: *const DestTrace,
    k: usize,
    node: usize,
    time: *mut f64,
    error_norm: *mut f64,
) -> DestStatus {
    guard(|| {
        let t = &get(tr, "trace")?.inner;
        if k >= t.len() || node >= t.l() {
            return Err((
                DestStatus::OutOfRange,
                format!("sample {k}, node {node} outside {} samples, {} nodes", t.len(), t.l()),
            ));
        }
        if !time.is_null() {
            time.write(t.times[k]);
        }
        if !error_norm.is_null() {
            error_norm.write(t.e_i[k][node].norm());
        }
        Ok(())
    })
}

/// Full trace as CSV text.
///
/// # Safety
/// `tr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dest_trace_to_csv(tr: *const DestTrace, out: *mut *mut c_char) -> DestStatus {
    guard(|| {
        let mut buf = Vec::new();
        netsim::write_trace_csv(&get(tr, "trace")?.inner, &mut buf).map_err(core)?;
        let text = String::from_utf8(buf).map_err(|e| (DestStatus::Internal, e.to_string()))?;
        put(out, to_c(text)?, "out")
    })
}

/// # Safety
/// `tr` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dest_trace_free(tr: *mut DestTrace) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}
