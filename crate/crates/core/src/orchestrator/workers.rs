//! Share-nothing workers: each reads one task file and writes its result
//! next to it, in the task's own directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::mor::reduce_subdomain;

use super::bundles::{read_file, write_file, ResultBundle, TaskBundle};
use super::OrchestratorError;

/// Environment variable naming a subdomain whose first worker attempt
/// aborts after the reduction, before its result is written.
pub const CRASH_ENV: &str = "NITSCHE_DD_CRASH_SUBDOMAIN";
const CRASH_MARKER: &str = "crash.marker";
pub const TASK_FILE: &str = "task.bin";
pub const RESULT_FILE: &str = "result.bin";
pub const TIMINGS_FILE: &str = "timings.txt";

/// How tasks are executed.
#[derive(Clone, Debug, PartialEq)]
pub enum Executor {
    /// Separate OS processes running `<exe> worker --task <path>`.
    Process(PathBuf),
    /// Sequentially inside the calling process, still through the files.
    InProcess,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerOptions {
    pub executor: Executor,
    pub workers: usize,
    /// Subdomain whose first attempt is made to crash (process executor
    /// only).
    pub inject_crash: Option<usize>,
}

pub fn result_path(task: &Path) -> PathBuf {
    task.with_file_name(RESULT_FILE)
}

/// Worker entry point: reduces one subdomain and writes `result.bin` and
/// `timings.txt` beside the task file.
pub fn run_task(task: &Path) -> Result<PathBuf, OrchestratorError> {
    let t = TaskBundle::decode(&read_file(task)?)?;
    let p = &t.problem;
    let (bundles, timings) = reduce_subdomain(p, &t.epsilons, t.keep_q)?;
    crash_if_requested(task, p.subdomain);
    let spaces = p.spaces();
    let core_coords = spaces
        .core
        .nodes()
        .iter()
        .map(|&n| spaces.nodes.coords(&p.mesh, n))
        .collect();
    let result = ResultBundle {
        subdomain: p.subdomain,
        bundles,
        core_coords,
    };
    let out = result_path(task);
    write_file(&out, &result.encode())?;
    let text = format!(
        "assembly = {}\nlifting = {}\nweights = {}\nsvd = {}\nbundles = {}\n",
        timings.assembly, timings.lifting, timings.weights, timings.svd, timings.bundles
    );
    write_file(&task.with_file_name(TIMINGS_FILE), text.as_bytes())?;
    Ok(out)
}

fn crash_if_requested(task: &Path, subdomain: usize) {
    let Ok(v) = std::env::var(CRASH_ENV) else {
        return;
    };
    if v.trim().parse() != Ok(subdomain) {
        return;
    }
    let marker = task.with_file_name(CRASH_MARKER);
    if marker.exists() {
        return;
    }
    let _ = std::fs::write(&marker, b"");
    // leave a torn result behind, as a killed process would
    if let Ok(mut f) = std::fs::File::create(result_path(task).with_extension("tmp")) {
        let _ = f.write_all(b"NDDRSLT\0partial");
    }
    log::error!("injected crash in subdomain {subdomain}");
    std::process::abort();
}

/// Per-phase worker seconds read back from `timings.txt`.
pub fn read_task_timings(task: &Path) -> Vec<(String, f64)> {
    let Ok(text) = std::fs::read_to_string(task.with_file_name(TIMINGS_FILE)) else {
        return Vec::new();
    };
    text.lines()
        .filter_map(|l| {
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), v.trim().parse().ok()?))
        })
        .collect()
}

fn attempt(task: &Path, subdomain: usize, opts: &WorkerOptions) -> Result<PathBuf, String> {
    match &opts.executor {
        Executor::InProcess => run_task(task).map_err(|e| e.to_string()),
        Executor::Process(exe) => {
            let mut cmd = Command::new(exe);
            cmd.arg("worker")
                .arg("--task")
                .arg(task)
                .stdin(Stdio::null())
                .stdout(Stdio::null());
            if opts.inject_crash == Some(subdomain) {
                cmd.env(CRASH_ENV, subdomain.to_string());
            } else {
                cmd.env_remove(CRASH_ENV);
            }
            let status = cmd
                .status()
                .map_err(|e| format!("cannot start {}: {e}", exe.display()))?;
            let out = result_path(task);
            if status.success() && out.exists() {
                Ok(out)
            } else {
                Err(format!("worker exited with {status}"))
            }
        }
    }
}

/// Runs every task, task `i` being subdomain `i`, with at most
/// `opts.workers` at a time. A failed task is retried once.
pub fn run_workers(
    tasks: &[PathBuf],
    opts: &WorkerOptions,
) -> Result<Vec<PathBuf>, OrchestratorError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PathBuf, String>>>> = Mutex::new(vec![None; tasks.len()]);
    let threads = match opts.executor {
        Executor::InProcess => 1,
        Executor::Process(_) => opts.workers.clamp(1, tasks.len().max(1)),
    };
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= tasks.len() {
                    break;
                }
                // a stale result from an earlier run must not count
                let _ = std::fs::remove_file(result_path(&tasks[i]));
                let mut outcome = attempt(&tasks[i], i, opts);
                if let Err(e) = &outcome {
                    log::warn!("subdomain {i}: {e}; retrying");
                    outcome = attempt(&tasks[i], i, opts);
                }
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Some(Ok(p)) => Ok(p),
            Some(Err(message)) => Err(OrchestratorError::Worker {
                subdomain: i,
                message,
            }),
            None => Err(OrchestratorError::Worker {
                subdomain: i,
                message: "task was never run".into(),
            }),
        })
        .collect()
}
