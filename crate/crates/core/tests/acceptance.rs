//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line to
//! the real stdout (bypassing capture) and then asserts the same condition,
//! so a failing criterion stays red.
//!
//! The tests hold a common lock so the wall-clock limits are measured
//! without competing for cores.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nitsche_dd::fem::Load;
use nitsche_dd::hybrid::{
    assemble_c, assemble_c_from_blocks, reduction_error, solve_full_nitsche, Decomposition,
    LocalBlocks,
};
use nitsche_dd::linalg::{dense_cholesky, dot, norm2, solve_lower, thin_svd, SparseCholesky};
use nitsche_dd::mesh::{generate_structured_mesh, read_msh, PartitionMethod};
use nitsche_dd::mor::{core_weight, reduce_subdomain, ExtendedSystem, ReducedBundle, WeightedSvd};
use nitsche_dd::orchestrator::{run_study, Executor, RunConfig, StudyReport, WorkerOptions};
use nitsche_dd::solver::{schur_apply, solve_reduced, PcgOptions, SchurProblem};

const ALPHA: f64 = 0.01;
const EPS3: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: usize, what: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n:>2}: {} | {what} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn workers(n: usize) -> WorkerOptions {
    WorkerOptions {
        executor: Executor::Process(PathBuf::from(env!("CARGO_BIN_EXE_nitsche-dd"))),
        workers: n,
        inject_crash: None,
    }
}

fn study(text: &str, out: &Path, opts: &WorkerOptions) -> (StudyReport, f64) {
    let mut cfg = RunConfig::parse(text, out).unwrap();
    cfg.out = out.to_path_buf();
    let clock = Instant::now();
    let report = run_study(&cfg, opts).unwrap();
    (report, clock.elapsed().as_secs_f64())
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn list(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter()
        .map(|x| format!("{x:.4e}"))
        .collect::<Vec<_>>()
        .join(" / ")
}

fn tight() -> PcgOptions {
    PcgOptions {
        tol: 1e-14,
        max_iters: 2000,
    }
}

fn decomposition(
    dim: usize,
    divisions: usize,
    degree: usize,
    n: usize,
    r_over_h: f64,
) -> Decomposition {
    let mesh = generate_structured_mesh(dim, divisions).unwrap();
    let r = r_over_h * mesh.h();
    Decomposition::new(mesh, degree, n, &PartitionMethod::Rcb, r).unwrap()
}

fn reduce_all(d: &Decomposition, eps: f64) -> Vec<ReducedBundle> {
    (0..d.n())
        .map(|i| {
            let p = d.problem(i, ALPHA, Load::Bubble).unwrap();
            reduce_subdomain(&p, &[eps], false).unwrap().0.remove(0)
        })
        .collect()
}

fn reduced_c(d: &Decomposition, b: &[ReducedBundle]) -> nitsche_dd::fem::CsrMatrix {
    assemble_c(
        b.iter().map(|b| (&b.trace_global[..], &b.c_local)),
        d.trace.len(),
    )
}

const CASE_TWO: &str = "dim = 3\ndivisions = 22\ndegree = 2\nsubdomains = 50\nradius = 4h\n\
                        epsilon = 1e-2, 1e-3, 1e-4\nalpha = 0.01\noracle = on\n";

/// The 91,125-DOF cube run, shared by the error and plateau checks.
fn case_two() -> &'static (StudyReport, f64) {
    static RUN: OnceLock<(StudyReport, f64)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        study(CASE_TWO, dir.path(), &workers(4))
    })
}

#[test]
fn criterion_01_coarse_cube_error() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let text = "dim = 3\ndivisions = 14\ndegree = 2\nsubdomains = 10\nradius = 4h\n\
                epsilon = 1e-2, 1e-3, 1e-4\nalpha = 0.01\noracle = on\n";
    let (report, secs) = study(text, dir.path(), &workers(4));
    let errors: Vec<f64> = report.rows.iter().map(|r| r.energy_error).collect();
    let dim_v = report.rows[0].dim_v;
    let pass = dim_v == 24_389 && errors.iter().all(|&e| within(e, 7.7e-3, 0.20)) && secs < 600.0;
    let iters: Vec<String> = report.rows.iter().map(|r| r.cg_iters.to_string()).collect();
    verdict(
        1,
        "cube dim(V)=24389, n=10, r=4h: energy error within 20% of 7.7e-3",
        pass,
        &format!(
            "dim_v={dim_v} errors(eps=1e-2/1e-3/1e-4)={} galerkin={} cg={} time={secs:.0}s",
            list(errors.iter().copied()),
            list(report.rows.iter().map(|r| r.galerkin_error)),
            iters.join("/")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_finer_cube_error() {
    let _g = serial();
    let (report, secs) = case_two();
    let targets = [3.2e-3, 3.1e-3, 3.1e-3];
    let errors: Vec<f64> = report.rows.iter().map(|r| r.energy_error).collect();
    let dim_v = report.rows[0].dim_v;
    let pass = dim_v == 91_125
        && errors.iter().zip(targets).all(|(&e, t)| within(e, t, 0.25))
        && *secs < 1800.0;
    verdict(
        2,
        "cube dim(V)=91125, n=50: energy error within 25% of 3.2e-3 / 3.1e-3 / 3.1e-3",
        pass,
        &format!(
            "dim_v={dim_v} errors={} galerkin={} reduction={} dim_lambda={} time={secs:.0}s (4 workers)",
            list(errors.iter().copied()),
            list(report.rows.iter().map(|r| r.galerkin_error)),
            list(report.rows.iter().map(|r| r.reduction_error.unwrap_or(f64::NAN))),
            report.rows.iter().map(|r| r.dim_lambda.to_string()).collect::<Vec<_>>().join("/")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_convergence_slopes() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let quadratic = "dim = 3\ndivisions = 6, 8, 10, 12\ndegree = 2\nsubdomains = 8\nradius = 2h\n\
                     epsilon = 1e-4\nstudy = h-sweep\n";
    let linear = "dim = 3\ndivisions = 8, 12, 16, 24\ndegree = 1\nsubdomains = 8\nradius = 2h\n\
                  epsilon = 1e-4\nstudy = h-sweep\n";
    let (p2, _) = study(quadratic, &dir.path().join("p2"), &workers(4));
    let (p1, _) = study(linear, &dir.path().join("p1"), &workers(4));
    let s2 = p2.slopes[0].slope;
    let s1 = p1.slopes[0].slope;
    let pass = p2.slopes[0].points >= 3 && (1.8..=2.2).contains(&s2) && (0.8..=1.2).contains(&s1);
    verdict(
        3,
        "log-log slope at eps=1e-4: p=2 in [1.8,2.2], p=1 in [0.8,1.2]",
        pass,
        &format!(
            "p=2 slope={s2:.3} errors={}; p=1 slope={s1:.3} errors={}",
            list(p2.rows.iter().map(|r| r.energy_error)),
            list(p1.rows.iter().map(|r| r.energy_error))
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_reduction_plateau() {
    let _g = serial();
    // finest mesh exercised by this suite
    let (report, _) = case_two();
    let e: Vec<f64> = report.rows.iter().map(|r| r.energy_error).collect();
    let plateau = e[0] >= 2.0 * e[2];
    let agree = (e[1] - e[2]).abs() <= 0.10 * e[2];
    let pass = plateau && agree;
    verdict(
        4,
        "finest cube: eps=1e-2 error >= 2x eps=1e-4 error, eps=1e-3 and 1e-4 within 10%",
        pass,
        &format!(
            "errors={} ratio(1e-2/1e-4)={:.2} rel diff(1e-3,1e-4)={:.1}% galerkin={}",
            list(e.iter().copied()),
            e[0] / e[2],
            100.0 * (e[1] - e[2]).abs() / e[2],
            list(report.rows.iter().map(|r| r.galerkin_error))
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_tiny_tolerance_matches_unreduced_solve() {
    let _g = serial();
    let clock = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for (dim, divisions, degree, n, r) in [(2, 4, 1, 4, 0.5), (2, 8, 1, 16, 0.5), (3, 4, 1, 8, 0.5)]
    {
        let d = decomposition(dim, divisions, degree, n, r);
        let bundles = reduce_all(&d, 1e-12);
        let red = solve_reduced(&SchurProblem::new(
            reduced_c(&d, &bundles),
            &bundles,
            tight(),
        ));
        let blocks = d.local_blocks(ALPHA, Load::Bubble).unwrap();
        let c = assemble_c_from_blocks(&blocks, &d.trace);
        let full = solve_full_nitsche(&blocks, &c, &tight()).unwrap();
        let diff: Vec<f64> = full
            .beta0
            .iter()
            .zip(&red.beta0)
            .map(|(a, b)| a - b)
            .collect();
        let rel = norm2(&diff) / norm2(&full.beta0);
        let rerr = reduction_error(&full.energies, &red.energies);
        pass &= rel <= 1e-6 && rerr <= 1e-8;
        details.push(format!(
            "{dim}D N={divisions} n={n}: beta0 rel={rel:.2e} reduction_error={rerr:.2e}"
        ));
    }
    let secs = clock.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    verdict(
        5,
        "eps=1e-12 reduced vs unreduced: beta0 rel <= 1e-6, reduction error <= 1e-8",
        pass,
        &format!("{}; time={secs:.1}s", details.join("; ")),
    );
    assert!(pass);
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|c| a[(r, c)] * x[c]).sum())
        .collect()
}

#[test]
fn criterion_06_truncation_is_optimal() {
    let _g = serial();
    let clock = Instant::now();
    let d = decomposition(3, 8, 2, 4, 2.0);
    let problem = d.problem(0, ALPHA, Load::Bubble).unwrap();
    let spaces = problem.spaces();
    let blocks = LocalBlocks::assemble(&problem, &spaces);
    let ext = ExtendedSystem::build(&problem, &spaces).unwrap();
    let z = ext.lifting_matrix();
    let m = core_weight(&blocks, problem.h);
    let n = ext.trace_weight().unwrap();
    let svd = WeightedSvd::new(&z, &m, &n).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // singular values at round-off level carry no relative accuracy
    let kmax = svd
        .sigma
        .iter()
        .take_while(|&&s| s > 1e-8 * svd.sigma[0])
        .count();
    let mut worst_norm: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for k in 0..kmax {
        let target = svd.sigma[k];
        let diff = &z - svd.approximation(k);
        // dense operator norm of L_M^T (Z - Z~) L_N^{-T}
        let mut w = (svd.l_m.transpose() * &diff).transpose().to_owned();
        solve_lower(svd.l_n.as_ref(), w.as_mut());
        let norm = thin_svd(w.as_ref(), "truncation error").unwrap().1[0];
        worst_norm = worst_norm.max((norm - target).abs() / target);
        for _ in 0..100 {
            let g = random_vec(&mut rng, z.ncols());
            let e = matvec(&diff, &g);
            let ratio = (dot(&e, &matvec(&m, &e)) / dot(&g, &matvec(&n, &g))).sqrt();
            worst_ratio = worst_ratio.max(ratio / target);
        }
    }
    let ks: Vec<usize> = EPS3.iter().map(|&e| svd.rank(e)).collect();
    let mut pass = kmax > 0 && worst_norm <= 1e-9 && worst_ratio <= 1.0 + 1e-9;
    let details = format!(
        "core dofs={} boundary dofs={} k=0..{kmax} (rank at eps 1e-2/1e-3/1e-4 = {ks:?}): \
         max norm rel dev={worst_norm:.1e} max ratio/sigma={worst_ratio:.4}",
        z.nrows(),
        z.ncols()
    );
    let secs = clock.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(
        6,
        "weighted truncation error equals the next singular value, random ratios bounded",
        pass,
        &format!("{details}; time={secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_operators_are_positive_definite() {
    let _g = serial();
    let d = decomposition(3, 6, 2, 8, 2.0);
    let mut failures = Vec::new();
    for i in 0..d.n() {
        let problem = d.problem(i, ALPHA, Load::Bubble).unwrap();
        let spaces = problem.spaces();
        let blocks = LocalBlocks::assemble(&problem, &spaces);
        let ext = ExtendedSystem::build(&problem, &spaces).unwrap();
        if SparseCholesky::new(&blocks.a, "A").is_err() {
            failures.push(format!("A_{i}"));
        }
        if dense_cholesky(core_weight(&blocks, problem.h).as_ref(), "M").is_err() {
            failures.push(format!("M_{i}"));
        }
        if !ext
            .trace_weight()
            .is_ok_and(|n| dense_cholesky(n.as_ref(), "N").is_ok())
        {
            failures.push(format!("N_{i}"));
        }
    }
    let bundles = reduce_all(&d, 1e-3);
    let c = reduced_c(&d, &bundles);
    if SparseCholesky::new(&c, "C").is_err() {
        failures.push("C".into());
    }
    let schur = SchurProblem::new(c, &bundles, PcgOptions::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut min_rayleigh = f64::INFINITY;
    for _ in 0..100 {
        let y = random_vec(&mut rng, schur.dim());
        min_rayleigh = min_rayleigh.min(dot(&y, &schur_apply(&schur, &y)) / dot(&y, &y));
    }

    let tiny = decomposition(2, 4, 2, 4, 1.0);
    let tb = reduce_all(&tiny, 1e-4);
    let ts = SchurProblem::new(reduced_c(&tiny, &tb), &tb, PcgOptions::default());
    let mut diag_dev: f64 = 0.0;
    for g in 0..ts.dim() {
        let mut e = vec![0.0; ts.dim()];
        e[g] = 1.0;
        let exact = schur_apply(&ts, &e)[g];
        diag_dev = diag_dev.max((ts.precond_diag[g] - exact).abs() / exact.abs());
    }

    let pass = failures.is_empty() && min_rayleigh > 0.0 && diag_dev <= 1e-12;
    verdict(
        7,
        "Cholesky of A_i, M, N, C; y^T S y > 0; preconditioner equals diag(S)",
        pass,
        &format!(
            "{} subdomains, failed factorizations={failures:?}, min Rayleigh quotient={min_rayleigh:.3e}, \
             max diagonal rel dev={diag_dev:.1e} over {} trace DOFs",
            d.n(),
            ts.dim()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_spectral_decay_with_extension() {
    let _g = serial();
    let mesh = generate_structured_mesh(3, 22).unwrap();
    let h = mesh.h();
    // rows r = 2h, 3h, 4h; columns eps = 1e-2, 1e-3, 1e-4
    let reference = [[161, 331, 527], [58, 128, 232], [29, 62, 106]];
    let mut ks = Vec::new();
    for r in [2.0, 3.0, 4.0] {
        let d = Decomposition::new(mesh.clone(), 2, 32, &PartitionMethod::Rcb, r * h).unwrap();
        let p = d.problem(11, ALPHA, Load::Bubble).unwrap();
        let (b, _) = reduce_subdomain(&p, &EPS3, false).unwrap();
        ks.push([b[0].k, b[1].k, b[2].k]);
    }
    let decreasing = ks[0][1] > ks[1][1] && ks[1][1] > ks[2][1];
    let factor =
        |k: usize, r: usize| k > 0 && (k as f64) <= 3.0 * r as f64 && 3.0 * k as f64 >= r as f64;
    let all_close = ks
        .iter()
        .zip(&reference)
        .all(|(k, r)| (0..3).all(|j| factor(k[j], r[j])));
    let pass = decreasing && all_close;
    let table: Vec<String> = ks
        .iter()
        .zip(&reference)
        .zip(["2h", "3h", "4h"])
        .map(|((k, r), name)| {
            format!(
                "r={name}: k={}/{}/{} ref={}/{}/{}",
                k[0], k[1], k[2], r[0], r[1], r[2]
            )
        })
        .collect();
    verdict(
        8,
        "crossing index at 1e-3 decreases with r; ranks within a factor 3 of the reference",
        pass,
        &format!(
            "decreasing={decreasing} within factor 3={all_close}; {} (N=22, n=32, subdomain 11)",
            table.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_determinism_and_retry() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let text = "dim = 3\ndivisions = 6\ndegree = 2\nsubdomains = 8\nradius = 2h\nepsilon = 1e-2, 1e-4\noracle = on\n";
    let read = |name: &str| std::fs::read(dir.path().join(name).join("report.csv")).unwrap();
    study(text, &dir.path().join("a"), &workers(4));
    study(text, &dir.path().join("b"), &workers(2));
    let mut crash = workers(4);
    crash.inject_crash = Some(3);
    study(text, &dir.path().join("c"), &crash);
    let retried = dir.path().join("c/case_0/tasks/3/crash.marker").exists();
    let same = read("a") == read("b");
    let recovered = read("a") == read("c");
    let pass = same && retried && recovered;
    verdict(
        9,
        "identical report bytes across runs; killed worker retried to the same report",
        pass,
        &format!("repeat identical={same} crash injected={retried} report after retry identical={recovered}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_declared_out_of_scope() {
    let _g = serial();
    // the production-scale runs need hardware and a mesh that are not available;
    // a pipe mesh given through the environment is still ingested
    let ingest = match std::env::var_os("NITSCHE_DD_PIPE_MESH") {
        Some(path) => {
            let mesh = read_msh(&path).unwrap();
            assert!(mesh.n_elements() > 0);
            format!("pipe mesh ingested: {} elements", mesh.n_elements())
        }
        None => "no pipe mesh provided (set NITSCHE_DD_PIPE_MESH to ingest one)".into(),
    };
    let line = format!(
        "criterion 10: DECLARED | 20M-DOF cube run and pipe reduction are not reproducible here, no numeric assertion | {ingest}\n"
    );
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
}
