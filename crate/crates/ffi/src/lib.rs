//! C interface: parse a run configuration, run it in-process and read the
//! report rows back.
//!
//! Every function returns an [`NddStatus`]. On failure the message is kept
//! per thread and can be copied out with [`ndd_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use nitsche_dd::orchestrator::{
    run_study, run_task, Executor, OrchestratorError, RunConfig, StudyReport, WorkerOptions,
};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NddStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Io = 4,
    CorruptFile = 5,
    Numerical = 6,
    Worker = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Parsed run configuration.
pub struct NddConfig(RunConfig);

/// Report of a finished run.
pub struct NddReport(StudyReport);

/// One report row. `reduction_error` is NaN when the oracle was off and
/// `kappa` is NaN when no estimate was available.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NddRow {
    pub case_index: usize,
    pub dim: usize,
    pub degree: usize,
    pub dim_v: usize,
    pub subdomains: usize,
    pub h: f64,
    pub epsilon: f64,
    pub energy_error: f64,
    /// From the work `f^T u` of the reduced solution.
    pub galerkin_error: f64,
    pub reduction_error: f64,
    pub trace_dim: usize,
    pub dim_lambda: usize,
    pub cg_iterations: usize,
    pub converged: bool,
    pub kappa: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &OrchestratorError) -> NddStatus {
    match e {
        OrchestratorError::Io { .. } => NddStatus::Io,
        OrchestratorError::Config(_) => NddStatus::InvalidConfig,
        OrchestratorError::Format(_)
        | OrchestratorError::MissingBundle(_)
        | OrchestratorError::DuplicateBundle(_)
        | OrchestratorError::UnexpectedBundle(_)
        | OrchestratorError::TraceMismatch(_)
        | OrchestratorError::EpsilonMismatch(_) => NddStatus::CorruptFile,
        OrchestratorError::Worker { .. } => NddStatus::Worker,
        _ => NddStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NddStatus, String)>) -> NddStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NddStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NddStatus::Panic
        }
    }
}

fn orch(e: OrchestratorError) -> (NddStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, (NddStatus, String)> {
    if p.is_null() {
        return Err((NddStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            NddStatus::InvalidUtf8,
            "string argument is not UTF-8".into(),
        )
    })
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, (NddStatus, String)> {
    str_arg(p).map(Path::new)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ndd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses configuration text. Relative paths in it resolve against
/// `base_dir`.
///
/// # Safety
/// `text` and `base_dir` must be NUL-terminated strings; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ndd_config_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut NddConfig,
) -> NddStatus {
    guard(|| {
        if out.is_null() {
            return Err((NddStatus::NullPointer, "null output handle".into()));
        }
        let text = str_arg(text)?;
        let base = path_arg(base_dir)?;
        let config =
            RunConfig::parse(text, base).map_err(|e| (NddStatus::InvalidConfig, e.to_string()))?;
        *out = Box::into_raw(Box::new(NddConfig(config)));
        Ok(())
    })
}

/// Reads a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ndd_config_from_file(
    path: *const c_char,
    out: *mut *mut NddConfig,
) -> NddStatus {
    guard(|| {
        if out.is_null() {
            return Err((NddStatus::NullPointer, "null output handle".into()));
        }
        let config = RunConfig::from_file(path_arg(path)?).map_err(orch)?;
        *out = Box::into_raw(Box::new(NddConfig(config)));
        Ok(())
    })
}

/// Replaces the output directory.
///
/// # Safety
/// `config` must come from this library; `dir` must be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn ndd_config_set_output(
    config: *mut NddConfig,
    dir: *const c_char,
) -> NddStatus {
    guard(|| {
        let c = config
            .as_mut()
            .ok_or((NddStatus::NullPointer, "null config".into()))?;
        c.0.out = PathBuf::from(path_arg(dir)?);
        Ok(())
    })
}

/// Turns the conforming reference solve on or off.
///
/// # Safety
/// `config` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ndd_config_set_oracle(config: *mut NddConfig, on: bool) -> NddStatus {
    guard(|| {
        let c = config
            .as_mut()
            .ok_or((NddStatus::NullPointer, "null config".into()))?;
        c.0.oracle = on;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ndd_config_free(config: *mut NddConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs every case of the configuration. Tasks are processed sequentially in
/// the calling process, still through the task and result files.
///
/// # Safety
/// `config` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ndd_run(config: *const NddConfig, out: *mut *mut NddReport) -> NddStatus {
    guard(|| {
        let c = config
            .as_ref()
            .ok_or((NddStatus::NullPointer, "null config".into()))?;
        if out.is_null() {
            return Err((NddStatus::NullPointer, "null output handle".into()));
        }
        let options = WorkerOptions {
            executor: Executor::InProcess,
            workers: 1,
            inject_crash: None,
        };
        let report = run_study(&c.0, &options).map_err(orch)?;
        *out = Box::into_raw(Box::new(NddReport(report)));
        Ok(())
    })
}

/// Reduces one subdomain task file, writing its result next to it.
///
/// # Safety
/// `task` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ndd_run_worker(task: *const c_char) -> NddStatus {
    guard(|| run_task(path_arg(task)?).map(|_| ()).map_err(orch))
}

/// Number of report rows, 0 for a null handle.
///
/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ndd_report_len(report: *const NddReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.rows.len())
}

/// # Safety
/// `report` must come from this library; `row` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ndd_report_row(
    report: *const NddReport,
    index: usize,
    row: *mut NddRow,
) -> NddStatus {
    guard(|| {
        let r = report
            .as_ref()
            .ok_or((NddStatus::NullPointer, "null report".into()))?;
        if row.is_null() {
            return Err((NddStatus::NullPointer, "null row".into()));
        }
        let src = r.0.rows.get(index).ok_or((
            NddStatus::OutOfRange,
            format!("row {index} of {}", r.0.rows.len()),
        ))?;
        *row = NddRow {
            case_index: src.case,
            dim: src.dim,
            degree: src.degree,
            dim_v: src.dim_v,
            subdomains: src.n,
            h: src.h,
            epsilon: src.epsilon,
            energy_error: src.energy_error,
            galerkin_error: src.galerkin_error,
            reduction_error: src.reduction_error.unwrap_or(f64::NAN),
            trace_dim: src.trace_dim,
            dim_lambda: src.dim_lambda,
            cg_iterations: src.cg_iters,
            converged: src.converged,
            kappa: src.kappa.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// # Safety
/// `report` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ndd_report_free(report: *mut NddReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
