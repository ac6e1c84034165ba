//! C ABI over `banyan-core`.
//!
//! Scenarios and runs are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns a
//! [`BanyanStatus`]; on failure, [`banyan_last_error`] describes what went
//! wrong on the calling thread. Strings returned through caller-provided
//! buffers are NUL-terminated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use banyan_core::harness::{self, RunOutcome, Scenario};
use banyan_core::types::{Mode, ProtocolConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BanyanStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidScenario = 4,
    Io = 5,
    /// The output buffer is too small; the required size was reported.
    BufferTooSmall = 6,
    Panic = 7,
}

/// A parsed and validated scenario.
pub struct BanyanScenario(Scenario);

/// The result of simulating one seed, with checker verdicts and metrics.
pub struct BanyanRun(RunOutcome);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BanyanSummary {
    pub rounds: u64,
    /// Number of checkers that reported a violation.
    pub violations: u32,
    pub mean_latency_ms: f64,
    pub p99_latency_ms: u64,
    pub fast_hit_rate: f64,
    pub throughput_bytes_per_s: f64,
    pub block_interval_ms: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: BanyanStatus, msg: impl Into<String>) -> BanyanStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`BanyanStatus::Panic`].
fn guard(f: impl FnOnce() -> BanyanStatus) -> BanyanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(BanyanStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, BanyanStatus> {
    if s.is_null() {
        return Err(fail(BanyanStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(BanyanStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Copies `s` plus a NUL into `buf`. `needed` (if non-null) receives the
/// required size in bytes, NUL included.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes; `needed` null or writable.
unsafe fn write_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> BanyanStatus {
    let size = s.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if buf.is_null() || len < size {
        return fail(BanyanStatus::BufferTooSmall, format!("buffer needs {size} bytes"));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    BanyanStatus::Ok
}

/// Message for the last failed call on this thread. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn banyan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn banyan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Checks `n >= max(3f + 2p - 1, 3f + 1)` and `p <= f`.
#[no_mangle]
pub extern "C" fn banyan_config_validate(n: u32, f: u32, p: u32) -> BanyanStatus {
    match ProtocolConfig::new(n, f, p, 1, Mode::Banyan).validate() {
        Ok(_) => BanyanStatus::Ok,
        Err(e) => fail(BanyanStatus::InvalidConfig, e.to_string()),
    }
}

/// Notarization and finalization quorum `ceil((n + f + 1) / 2)`.
#[no_mangle]
pub extern "C" fn banyan_notarization_quorum(n: u32, f: u32) -> u32 {
    ProtocolConfig::new(n, f, 0, 1, Mode::Banyan).notarization_quorum() as u32
}

/// Fast-path quorum `n - p`.
#[no_mangle]
pub extern "C" fn banyan_fast_quorum(n: u32, p: u32) -> u32 {
    n.saturating_sub(p)
}

/// Parses a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn banyan_scenario_from_json(json: *const c_char, out: *mut *mut BanyanScenario) -> BanyanStatus {
    guard(|| {
        if out.is_null() {
            return fail(BanyanStatus::NullArgument, "out is null");
        }
        let text = match read_str(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::from_json(text, "<ffi>") {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(BanyanScenario(sc)));
                BanyanStatus::Ok
            }
            Err(e) => fail(BanyanStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// Loads a scenario file, or a bundled preset by name.
///
/// # Safety
/// `name_or_path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn banyan_scenario_load(
    name_or_path: *const c_char,
    out: *mut *mut BanyanScenario,
) -> BanyanStatus {
    guard(|| {
        if out.is_null() {
            return fail(BanyanStatus::NullArgument, "out is null");
        }
        let name = match read_str(name_or_path, "name_or_path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::load(name) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(BanyanScenario(sc)));
                BanyanStatus::Ok
            }
            Err(e @ harness::ScenarioError::Io { .. }) => fail(BanyanStatus::Io, e.to_string()),
            Err(e) => fail(BanyanStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn banyan_scenario_free(scenario: *mut BanyanScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates `seed` and runs every checker.
///
/// # Safety
/// `scenario` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn banyan_run(
    scenario: *const BanyanScenario,
    seed: u64,
    out: *mut *mut BanyanRun,
) -> BanyanStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            return fail(BanyanStatus::NullArgument, "scenario or out is null");
        }
        match harness::run_seed(&(*scenario).0, seed) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(BanyanRun(outcome)));
                BanyanStatus::Ok
            }
            Err(e) => fail(BanyanStatus::InvalidScenario, e.to_string()),
        }
    })
}

/// # Safety
/// `run` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn banyan_run_free(run: *mut BanyanRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn banyan_run_summary(run: *const BanyanRun, out: *mut BanyanSummary) -> BanyanStatus {
    if run.is_null() || out.is_null() {
        return fail(BanyanStatus::NullArgument, "run or out is null");
    }
    let o = &(*run).0;
    let m = &o.metrics;
    *out = BanyanSummary {
        rounds: m.rounds,
        violations: o.reports.iter().filter(|r| r.is_violation()).count() as u32,
        mean_latency_ms: m.mean_latency_ms,
        p99_latency_ms: m.p99_latency_ms,
        fast_hit_rate: m.fast_hit_rate,
        throughput_bytes_per_s: m.throughput_bytes_per_s,
        block_interval_ms: m.block_interval_ms,
    };
    BanyanStatus::Ok
}

/// Hex trace digest: 64 characters plus NUL.
///
/// # Safety
/// `run` must be a live handle; `buf` valid for `len` bytes; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn banyan_run_digest(
    run: *const BanyanRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> BanyanStatus {
    if run.is_null() {
        return fail(BanyanStatus::NullArgument, "run is null");
    }
    write_str(&(*run).0.digest, buf, len, needed)
}

/// Checker reports as a JSON array. Call with a null buffer to learn the size.
///
/// # Safety
/// `run` must be a live handle; `buf` null or valid for `len` bytes; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn banyan_run_reports_json(
    run: *const BanyanRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> BanyanStatus {
    guard(|| {
        if run.is_null() {
            return fail(BanyanStatus::NullArgument, "run is null");
        }
        match serde_json::to_string(&(*run).0.reports) {
            Ok(json) => write_str(&json, buf, len, needed),
            Err(e) => fail(BanyanStatus::Io, e.to_string()),
        }
    })
}

/// Writes the trace as JSON lines to `path`.
///
/// # Safety
/// `run` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn banyan_run_write_trace(run: *const BanyanRun, path: *const c_char) -> BanyanStatus {
    guard(|| {
        if run.is_null() {
            return fail(BanyanStatus::NullArgument, "run is null");
        }
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let written = File::create(path).and_then(|f| (*run).0.trace.write_jsonl(BufWriter::new(f)));
        match written {
            Ok(_) => BanyanStatus::Ok,
            Err(e) => fail(BanyanStatus::Io, format!("{path}: {e}")),
        }
    })
}
