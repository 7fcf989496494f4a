//! File-based workflow: task and result files, worker scheduling, fault
//! injection and report determinism.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nitsche_dd::mesh::{generate_structured_mesh, write_msh};
use nitsche_dd::orchestrator::bundles::{read_file, ResultBundle, SubdomainSolution, TaskBundle};
use nitsche_dd::orchestrator::study::{assemble_and_solve, plan_and_write_tasks};
use nitsche_dd::orchestrator::workers::result_path;
use nitsche_dd::orchestrator::{
    run_study, run_task, run_workers, Executor, FormatError, OrchestratorError, RunConfig,
    WorkerOptions,
};

const SMALL: &str = "dim = 2\ndivisions = 8\ndegree = 2\nsubdomains = 4\nradius = 2h\nepsilon = 1e-2, 1e-4\noracle = on\n";

fn config(text: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::parse(text, out).unwrap();
    c.out = out.to_path_buf();
    c
}

fn processes(workers: usize) -> WorkerOptions {
    WorkerOptions {
        executor: Executor::Process(PathBuf::from(env!("CARGO_BIN_EXE_nitsche-dd"))),
        workers,
        inject_crash: None,
    }
}

fn in_process() -> WorkerOptions {
    WorkerOptions {
        executor: Executor::InProcess,
        workers: 1,
        inject_crash: None,
    }
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn task_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let case = cfg.cases()[0].clone();
    let a = plan_and_write_tasks(&cfg, &case, 0, &dir.path().join("a")).unwrap();
    let b = plan_and_write_tasks(&cfg, &case, 0, &dir.path().join("b")).unwrap();
    assert_eq!(a.tasks.len(), 4);
    assert_eq!(a.partition_hash, b.partition_hash);
    for (x, y) in a.tasks.iter().zip(&b.tasks) {
        assert_eq!(read(x), read(y));
    }
}

#[test]
fn task_bundles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let plan = plan_and_write_tasks(&cfg, &cfg.cases()[0], 0, dir.path()).unwrap();
    for (i, path) in plan.tasks.iter().enumerate() {
        let bytes = read(path);
        let task = TaskBundle::decode(&bytes).unwrap();
        assert_eq!(
            task.problem,
            plan.decomposition.problem(i, cfg.alpha, cfg.load).unwrap()
        );
        assert_eq!(task.epsilons, cfg.epsilons);
        assert_eq!(task.encode(), bytes);

        let result = ResultBundle::decode(&read(run_task(path).unwrap())).unwrap();
        assert_eq!(result.subdomain, i);
        assert_eq!(result.encode(), read(result_path(path)));
    }
}

#[test]
fn tampered_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let plan = plan_and_write_tasks(&cfg, &cfg.cases()[0], 0, dir.path()).unwrap();
    let task = &plan.tasks[0];
    let mut bytes = read(task);
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(task, &bytes).unwrap();
    assert!(matches!(
        run_task(task),
        Err(OrchestratorError::Format(FormatError::Checksum))
    ));

    let result = run_task(&plan.tasks[1]).unwrap();
    let mut bytes = read(&result);
    bytes[20] ^= 1;
    std::fs::write(&result, &bytes).unwrap();
    assert!(matches!(
        ResultBundle::decode(&bytes),
        Err(OrchestratorError::Format(FormatError::Checksum))
    ));
    assert!(matches!(
        TaskBundle::decode(&read(&plan.tasks[2])[..100]),
        Err(OrchestratorError::Format(_))
    ));
}

#[test]
fn core_elements_cover_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "dim = 3\ndivisions = 4\ndegree = 1\nsubdomains = 6\nradius = 1h\n",
        dir.path(),
    );
    let plan = plan_and_write_tasks(&cfg, &cfg.cases()[0], 0, dir.path()).unwrap();
    let mut seen = vec![0usize; plan.decomposition.mesh.n_elements()];
    for path in &plan.tasks {
        let p = TaskBundle::decode(&read(path)).unwrap().problem;
        for &e in &p.global_elements[..p.n_core] {
            seen[e] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
}

#[test]
fn missing_and_duplicate_results_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let plan = plan_and_write_tasks(&cfg, &cfg.cases()[0], 0, dir.path()).unwrap();
    let results = run_workers(&plan.tasks, &in_process()).unwrap();
    assert!(assemble_and_solve(&plan, &results, &cfg, None).is_ok());
    assert!(matches!(
        assemble_and_solve(&plan, &results[..3], &cfg, None),
        Err(OrchestratorError::MissingBundle(3))
    ));
    let dup = vec![
        results[0].clone(),
        results[1].clone(),
        results[1].clone(),
        results[3].clone(),
    ];
    assert!(matches!(
        assemble_and_solve(&plan, &dup, &cfg, None),
        Err(OrchestratorError::DuplicateBundle(1))
    ));
    let mut other = cfg.clone();
    other.epsilons = vec![1e-3];
    assert!(matches!(
        assemble_and_solve(&plan, &results, &other, None),
        Err(OrchestratorError::EpsilonMismatch(0))
    ));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let one = config(SMALL, &dir.path().join("one"));
    let four = config(SMALL, &dir.path().join("four"));
    let r1 = run_study(&one, &processes(1)).unwrap();
    let r4 = run_study(&four, &processes(4)).unwrap();
    assert_eq!(r1.report_csv(), r4.report_csv());
    for i in 0..4 {
        let task = format!("case_0/tasks/{i}/result.bin");
        assert_eq!(read(one.out.join(&task)), read(four.out.join(&task)));
        let sol = format!("case_0/solution_{i}.bin");
        assert_eq!(read(one.out.join(&sol)), read(four.out.join(&sol)));
    }
    let inproc = config(SMALL, &dir.path().join("inproc"));
    run_study(&inproc, &in_process()).unwrap();
    assert_eq!(
        read(one.out.join("report.csv")),
        read(inproc.out.join("report.csv"))
    );
}

#[test]
fn crashed_worker_is_retried() {
    let dir = tempfile::tempdir().unwrap();
    let clean = config(SMALL, &dir.path().join("clean"));
    let crashed = config(SMALL, &dir.path().join("crashed"));
    let reference = run_study(&clean, &processes(2)).unwrap();
    let mut opts = processes(2);
    opts.inject_crash = Some(2);
    let report = run_study(&crashed, &opts).unwrap();
    assert!(crashed.out.join("case_0/tasks/2/crash.marker").exists());
    assert_eq!(reference.report_csv(), report.report_csv());
    assert_eq!(
        read(clean.out.join("report.csv")),
        read(crashed.out.join("report.csv"))
    );
}

#[test]
fn workers_stay_in_their_task_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    run_study(&cfg, &processes(4)).unwrap();
    let allowed: BTreeSet<&str> = ["task.bin", "result.bin", "timings.txt"].into();
    for i in 0..4 {
        let task_dir = dir.path().join(format!("case_0/tasks/{i}"));
        let names: Vec<String> = std::fs::read_dir(&task_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert!(
            names.iter().all(|n| allowed.contains(n.as_str())),
            "{names:?}"
        );

        // a task copied on its own reproduces the result byte for byte
        let alone = tempfile::tempdir().unwrap();
        let copy = alone.path().join("task.bin");
        std::fs::copy(task_dir.join("task.bin"), &copy).unwrap();
        let produced = run_task(&copy).unwrap();
        assert_eq!(read(produced), read(task_dir.join("result.bin")));
        assert_eq!(std::fs::read_dir(alone.path()).unwrap().count(), 3);
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text = "dim = 2\ndivisions = 4, 8, 16\ndegree = 1\nsubdomains = 4\nradius = 2h\nepsilon = 1e-3\nstudy = h-sweep\noracle = on\n";
    let a = config(text, &dir.path().join("a"));
    let b = config(text, &dir.path().join("b"));
    let ra = run_study(&a, &processes(3)).unwrap();
    run_study(&b, &processes(1)).unwrap();
    for f in ["report.csv", "slopes.csv"] {
        assert_eq!(read(a.out.join(f)), read(b.out.join(f)), "{f}");
    }
    assert_eq!(ra.rows.len(), 3);
    assert_eq!(ra.slopes.len(), 1);
    let csv = String::from_utf8(read(a.out.join("report.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let timings = String::from_utf8(read(a.out.join("timings.csv"))).unwrap();
    assert!(timings.contains("workers") && timings.contains("svd"));
}

#[test]
fn solutions_and_spectra_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL, dir.path());
    let report = run_study(&cfg, &in_process()).unwrap();
    let k = &report.rows[1].k;
    for i in 0..4 {
        let sol = SubdomainSolution::decode(
            &read_file(&dir.path().join(format!("case_0/solution_{i}.bin"))).unwrap(),
        )
        .unwrap();
        assert_eq!(sol.subdomain, i);
        assert_eq!(sol.solutions.len(), 2);
        assert!(sol
            .solutions
            .iter()
            .all(|(_, b)| b.len() == sol.core_coords.len()));
        let spectrum =
            String::from_utf8(read(dir.path().join(format!("case_0/spectrum_{i}.csv")))).unwrap();
        let sigma: Vec<f64> = spectrum
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(sigma.iter().filter(|&&s| s > 1e-4).count(), k[i]);
    }
}

#[test]
fn msh_meshes_are_ingested() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate_structured_mesh(2, 8).unwrap();
    write_msh(&mesh, dir.path().join("square.msh")).unwrap();
    let from_file = config(
        "mesh = square.msh\ndegree = 2\nsubdomains = 4\nradius = 2h\nepsilon = 1e-2, 1e-4\noracle = on\n",
        dir.path(),
    );
    let generated = config(SMALL, &dir.path().join("generated"));
    let a = run_study(&from_file, &in_process()).unwrap();
    let b = run_study(&generated, &in_process()).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.divisions, None);
        assert_eq!(
            (x.dim_v, x.trace_dim, x.dim_lambda),
            (y.dim_v, y.trace_dim, y.dim_lambda)
        );
        assert!((x.energy_error - y.energy_error).abs() <= 1e-10 * y.energy_error);
    }
}
