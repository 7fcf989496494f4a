//! Main-process side of a run: planning, assembling the reduced Schur system
//! from worker results, error evaluation and report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::fem::{conforming_solve, Load};
use crate::hybrid::{assemble_c, energy_error, reduction_error, Decomposition};
use crate::mesh::{
    extend_subdomains, generate_structured_mesh, partition_elements, read_msh, Mesh,
};
use crate::mor::ReducedBundle;
use crate::solver::{solve_reduced, PcgOptions, SchurProblem, Solution};

use super::bundles::{read_file, write_file, ResultBundle, SubdomainSolution, TaskBundle};
use super::config::{Case, MeshSource, RunConfig, StudyMode};
use super::workers::{read_task_timings, run_workers, WorkerOptions, TASK_FILE};
use super::OrchestratorError;

/// What the main process keeps of one case after writing its tasks.
pub struct Plan {
    pub index: usize,
    pub case: Case,
    pub dir: PathBuf,
    pub decomposition: Decomposition,
    /// Task file of subdomain `i` at position `i`.
    pub tasks: Vec<PathBuf>,
    /// Trace DOFs each subdomain must report, in increasing order.
    pub expected_trace: Vec<Vec<usize>>,
    /// All Lagrange nodes including those on the outer boundary.
    pub dim_v: usize,
    pub free_dofs: usize,
    pub h: f64,
    pub radius: f64,
    pub partition_hash: [u8; 32],
}

/// One row of `report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub case: usize,
    pub dim: usize,
    pub divisions: Option<usize>,
    pub degree: usize,
    pub dim_v: usize,
    pub free_dofs: usize,
    pub n: usize,
    pub h: f64,
    pub radius: f64,
    pub overlap: usize,
    pub epsilon: f64,
    pub energy_error: f64,
    /// `(E - sum_i f~_i^T beta~_i)^{1/2}`: the exact energy-norm error of
    /// the reduced Galerkin solution including the skeleton terms that
    /// `energy_error` leaves out.
    pub galerkin_error: f64,
    /// Present when the conforming oracle ran.
    pub reduction_error: Option<f64>,
    /// `K = dim(S~)`.
    pub trace_dim: usize,
    pub dim_lambda: usize,
    /// `nnz(C) + sum_i size(B~_i)`.
    pub nnz_proxy: usize,
    pub cg_iters: usize,
    pub converged: bool,
    pub kappa: Option<f64>,
    /// `1 - dim(Lambda) / dim(V)`.
    pub reduction: f64,
    pub k: Vec<usize>,
}

pub const REPORT_HEADER: &str = "case,dim,divisions,degree,dim_v,free_dofs,n,h,radius,overlap,epsilon,\
energy_error,galerkin_error,reduction_error,trace_dim,dim_lambda,nnz_proxy,cg_iters,converged,kappa,reduction,k_min,k_max";

impl ReportRow {
    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6e}"));
        format!(
            "{},{},{},{},{},{},{},{:.6e},{:.6e},{},{:e},{:.6e},{:.6e},{},{},{},{},{},{},{},{:.6},{},{}",
            self.case,
            self.dim,
            self.divisions.map_or(String::new(), |d| d.to_string()),
            self.degree,
            self.dim_v,
            self.free_dofs,
            self.n,
            self.h,
            self.radius,
            self.overlap,
            self.epsilon,
            self.energy_error,
            self.galerkin_error,
            opt(self.reduction_error),
            self.trace_dim,
            self.dim_lambda,
            self.nnz_proxy,
            self.cg_iters,
            self.converged,
            opt(self.kappa),
            self.reduction,
            self.k.iter().min().copied().unwrap_or(0),
            self.k.iter().max().copied().unwrap_or(0),
        )
    }
}

/// Log-log regression of the energy error against `h` for one tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Slope {
    pub epsilon: f64,
    pub points: usize,
    pub slope: f64,
}

/// Wall-clock seconds of one phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub case: usize,
    /// Subdomain for worker phases.
    pub subdomain: Option<usize>,
    pub phase: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<ReportRow>,
    pub slopes: Vec<Slope>,
    pub timings: Vec<Timing>,
}

impl StudyReport {
    pub fn report_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }

    pub fn slopes_csv(&self) -> String {
        let mut s = String::from("epsilon,points,slope\n");
        for r in &self.slopes {
            let _ = writeln!(s, "{:e},{},{:.6}", r.epsilon, r.points, r.slope);
        }
        s
    }

    pub fn timings_csv(&self) -> String {
        let mut s = String::from("case,subdomain,phase,seconds\n");
        for t in &self.timings {
            let sub = t.subdomain.map_or(String::new(), |i| i.to_string());
            let _ = writeln!(s, "{},{},{},{:.6}", t.case, sub, t.phase, t.seconds);
        }
        s
    }
}

/// Everything [`assemble_and_solve`] produces for one case.
pub struct CaseOutcome {
    pub rows: Vec<ReportRow>,
    /// One solution per tolerance.
    pub solutions: Vec<Solution>,
    pub results: Vec<ResultBundle>,
    pub timings: Vec<Timing>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> OrchestratorError + '_ {
    move |source| OrchestratorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn build_mesh(config: &RunConfig, case: &Case) -> Result<Mesh, OrchestratorError> {
    Ok(match (&config.mesh, case.divisions) {
        (MeshSource::Generated { dim, .. }, Some(d)) => generate_structured_mesh(*dim, d)?,
        (MeshSource::Msh(path), _) => read_msh(path)?,
        (MeshSource::Generated { .. }, None) => {
            unreachable!("generated meshes always have divisions")
        }
    })
}

fn hash_assignment(part_of: &[usize]) -> [u8; 32] {
    let mut h = Sha256::new();
    for &p in part_of {
        h.update((p as u64).to_le_bytes());
    }
    h.finalize().into()
}

/// Builds the decomposition of one case and writes one task file per
/// subdomain into `dir/tasks/<i>/`. An existing `dir` is replaced.
pub fn plan_and_write_tasks(
    config: &RunConfig,
    case: &Case,
    index: usize,
    dir: &Path,
) -> Result<Plan, OrchestratorError> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(io(dir))?;
    }
    let mesh = build_mesh(config, case)?;
    let first = partition_elements(&mesh, case.n, &config.partition)?;
    let second = partition_elements(&mesh, case.n, &config.partition)?;
    let partition_hash = hash_assignment(&first.part_of);
    if partition_hash != hash_assignment(&second.part_of) {
        return Err(OrchestratorError::Nondeterministic("partition".into()));
    }
    if let Some(&i) = first.empty_subdomains().first() {
        return Err(crate::hybrid::HybridError::EmptySubdomain(i).into());
    }
    let h = mesh.h();
    let radius = config.radius.resolve(h);
    let partition = extend_subdomains(&mesh, &first, radius);
    let decomposition = Decomposition::from_partition(mesh, config.degree, partition)?;
    let nodes = &decomposition.nodes;
    let dim_v = nodes.n_nodes();
    let free_dofs = (0..dim_v).filter(|&v| !nodes.is_constrained(v)).count();

    let mut tasks = Vec::with_capacity(case.n);
    let mut expected_trace = Vec::with_capacity(case.n);
    for i in 0..case.n {
        let problem = decomposition.problem(i, config.alpha, config.load)?;
        let mut trace: Vec<usize> = problem
            .interface
            .iter()
            .flat_map(|f| f.trace.iter().flatten().copied())
            .collect();
        trace.sort_unstable();
        trace.dedup();
        expected_trace.push(trace);
        let task_dir = dir.join("tasks").join(i.to_string());
        std::fs::create_dir_all(&task_dir).map_err(io(&task_dir))?;
        let path = task_dir.join(TASK_FILE);
        let task = TaskBundle {
            problem,
            epsilons: config.epsilons.clone(),
            keep_q: config.solutions,
        };
        write_file(&path, &task.encode())?;
        tasks.push(path);
    }
    log::info!(
        "case {index}: {} elements, {dim_v} nodes ({free_dofs} free), {} subdomains, {} trace DOFs, overlap {}",
        decomposition.mesh.n_elements(),
        case.n,
        decomposition.trace.len(),
        decomposition.partition.overlap
    );
    Ok(Plan {
        index,
        case: case.clone(),
        dir: dir.to_path_buf(),
        decomposition,
        tasks,
        expected_trace,
        dim_v,
        free_dofs,
        h,
        radius,
        partition_hash,
    })
}

/// Reads and checks the worker results of a plan.
pub fn read_results(
    plan: &Plan,
    results: &[PathBuf],
    epsilons: &[f64],
) -> Result<Vec<ResultBundle>, OrchestratorError> {
    let n = plan.case.n;
    let mut slots: Vec<Option<ResultBundle>> = vec![None; n];
    for path in results {
        let r = ResultBundle::decode(&read_file(path)?)?;
        let i = r.subdomain;
        if i >= n {
            return Err(OrchestratorError::UnexpectedBundle(i));
        }
        if slots[i].is_some() {
            return Err(OrchestratorError::DuplicateBundle(i));
        }
        let eps: Vec<f64> = r.bundles.iter().map(|b| b.epsilon).collect();
        if eps != epsilons {
            return Err(OrchestratorError::EpsilonMismatch(i));
        }
        if r.bundles
            .iter()
            .any(|b| b.trace_global != plan.expected_trace[i])
        {
            return Err(OrchestratorError::TraceMismatch(i));
        }
        slots[i] = Some(r);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or(OrchestratorError::MissingBundle(i)))
        .collect()
}

/// Concatenates the reduced bundles, solves the reduced Schur system for each
/// tolerance and evaluates the errors. `conforming` holds the per-subdomain
/// energies of the conforming solution when the oracle is on.
pub fn assemble_and_solve(
    plan: &Plan,
    results: &[PathBuf],
    config: &RunConfig,
    conforming: Option<&[f64]>,
) -> Result<CaseOutcome, OrchestratorError> {
    let results = read_results(plan, results, &config.epsilons)?;
    let d = &plan.decomposition;
    let k = d.trace.len();
    let options = PcgOptions {
        tol: config.tol,
        max_iters: config.max_iters,
    };
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    let mut timings = Vec::new();
    for (e, &epsilon) in config.epsilons.iter().enumerate() {
        let clock = Instant::now();
        let bundles: Vec<ReducedBundle> = results.iter().map(|r| r.bundles[e].clone()).collect();
        let c = assemble_c(bundles.iter().map(|b| (&b.trace_global[..], &b.c_local)), k);
        let nnz_c = c.nnz();
        let problem = SchurProblem::new(c, &bundles, options);
        if let Some(g) = problem.precond_diag.iter().position(|&v| !(v > 0.0)) {
            log::warn!("preconditioner entry {g} is not positive");
        }
        let sol = solve_reduced(&problem);
        if !sol.converged {
            log::warn!(
                "case {} eps {epsilon:e}: PCG stopped after {} iterations",
                plan.index,
                sol.iterations
            );
        }
        timings.push(Timing {
            case: plan.index,
            subdomain: None,
            phase: format!("solve eps={epsilon:e}"),
            seconds: clock.elapsed().as_secs_f64(),
        });
        let dim_lambda: usize = bundles.iter().map(|b| b.dim()).sum();
        let energy = match config.load.exact_energy() {
            Some(exact) if exact == 1.0 => energy_error(&sol.energies),
            Some(exact) => signed_sqrt(exact - sol.energies.iter().sum::<f64>()),
            None => f64::NAN,
        };
        let work: f64 = bundles
            .iter()
            .zip(&sol.beta_tilde)
            .map(|(b, x)| b.f.iter().zip(x).map(|(f, x)| f * x).sum::<f64>())
            .sum();
        let galerkin = config
            .load
            .exact_energy()
            .map_or(f64::NAN, |e| signed_sqrt(e - work));
        rows.push(ReportRow {
            case: plan.index,
            dim: d.mesh.dim(),
            divisions: plan.case.divisions,
            degree: config.degree,
            dim_v: plan.dim_v,
            free_dofs: plan.free_dofs,
            n: plan.case.n,
            h: plan.h,
            radius: plan.radius,
            overlap: d.partition.overlap,
            epsilon,
            energy_error: energy,
            galerkin_error: galerkin,
            reduction_error: conforming.map(|c| reduction_error(c, &sol.energies)),
            trace_dim: k,
            dim_lambda,
            nnz_proxy: nnz_c
                + bundles
                    .iter()
                    .map(|b| b.dim() * b.trace_global.len())
                    .sum::<usize>(),
            cg_iters: sol.iterations,
            converged: sol.converged,
            kappa: sol.kappa,
            reduction: 1.0 - dim_lambda as f64 / plan.dim_v as f64,
            k: bundles.iter().map(|b| b.k).collect(),
        });
        solutions.push(sol);
    }
    Ok(CaseOutcome {
        rows,
        solutions,
        results,
        timings,
    })
}

fn signed_sqrt(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}

/// Per-subdomain conforming energies on the core element sets.
pub fn conforming_energies(plan: &Plan, load: Load) -> Result<Vec<f64>, OrchestratorError> {
    let d = &plan.decomposition;
    let dim = d.mesh.dim();
    let conf = conforming_solve(&d.mesh, d.nodes.degree, &|x| load.eval(dim, x))?;
    Ok(d.partition
        .core_elems
        .iter()
        .map(|c| conf.energy_on(c))
        .collect())
}

fn write_case_files(
    plan: &Plan,
    outcome: &CaseOutcome,
    config: &RunConfig,
) -> Result<(), OrchestratorError> {
    for r in &outcome.results {
        let mut s = String::from("index,sigma\n");
        if let Some(b) = r.bundles.first() {
            for (j, v) in b.sigma.iter().enumerate() {
                let _ = writeln!(s, "{},{:e}", j + 1, v);
            }
        }
        let path = plan.dir.join(format!("spectrum_{}.csv", r.subdomain));
        write_file(&path, s.as_bytes())?;
        if config.solutions {
            let sol = SubdomainSolution {
                subdomain: r.subdomain,
                core_coords: r.core_coords.clone(),
                solutions: config
                    .epsilons
                    .iter()
                    .zip(&outcome.solutions)
                    .filter_map(|(&eps, s)| s.beta[r.subdomain].clone().map(|b| (eps, b)))
                    .collect(),
            };
            let path = plan.dir.join(format!("solution_{}.bin", r.subdomain));
            write_file(&path, &sol.encode())?;
        }
    }
    Ok(())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Energy-error slopes over `h` per tolerance, for tolerances with at least
/// three distinct mesh sizes and positive errors.
pub fn slopes(rows: &[ReportRow], epsilons: &[f64]) -> Vec<Slope> {
    epsilons
        .iter()
        .filter_map(|&epsilon| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.epsilon == epsilon && r.energy_error > 0.0)
                .map(|r| (r.h, r.energy_error))
                .collect();
            let mut hs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            hs.sort_by(f64::total_cmp);
            hs.dedup();
            (hs.len() >= 3).then(|| Slope {
                epsilon,
                points: pts.len(),
                slope: loglog_slope(&pts),
            })
        })
        .collect()
}

/// Runs every case of the configuration through the file-based workflow and
/// writes `report.csv`, `timings.csv` and, for h-sweeps, `slopes.csv` into
/// the output directory, with per-case spectra and solutions under
/// `case_<c>/`.
pub fn run_study(
    config: &RunConfig,
    workers: &WorkerOptions,
) -> Result<StudyReport, OrchestratorError> {
    config.validate()?;
    let out = &config.out;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let mut report = StudyReport::default();
    for (index, case) in config.cases().iter().enumerate() {
        let dir = out.join(format!("case_{index}"));
        let clock = Instant::now();
        let plan = plan_and_write_tasks(config, case, index, &dir)?;
        report.timings.push(Timing {
            case: index,
            subdomain: None,
            phase: "plan".into(),
            seconds: clock.elapsed().as_secs_f64(),
        });

        let clock = Instant::now();
        let results = run_workers(&plan.tasks, workers)?;
        report.timings.push(Timing {
            case: index,
            subdomain: None,
            phase: "workers".into(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        for (i, task) in plan.tasks.iter().enumerate() {
            for (phase, seconds) in read_task_timings(task) {
                report.timings.push(Timing {
                    case: index,
                    subdomain: Some(i),
                    phase,
                    seconds,
                });
            }
        }

        let conforming = if config.oracle {
            let clock = Instant::now();
            let e = conforming_energies(&plan, config.load)?;
            report.timings.push(Timing {
                case: index,
                subdomain: None,
                phase: "oracle".into(),
                seconds: clock.elapsed().as_secs_f64(),
            });
            Some(e)
        } else {
            None
        };
        let outcome = assemble_and_solve(&plan, &results, config, conforming.as_deref())?;
        write_case_files(&plan, &outcome, config)?;
        for r in &outcome.rows {
            log::info!(
                "case {index} eps {:e}: energy error {:.4e}, {} iterations, K = {}, dim(Lambda) = {}",
                r.epsilon,
                r.energy_error,
                r.cg_iters,
                r.trace_dim,
                r.dim_lambda
            );
        }
        report.rows.extend(outcome.rows);
        report.timings.extend(outcome.timings);
    }
    if config.study == StudyMode::HSweep {
        report.slopes = slopes(&report.rows, &config.epsilons);
        let path = out.join("slopes.csv");
        write_file(&path, report.slopes_csv().as_bytes())?;
    }
    write_file(&out.join("report.csv"), report.report_csv().as_bytes())?;
    write_file(&out.join("timings.csv"), report.timings_csv().as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&h| (h, 3.0 * h * h))
            .collect();
        assert!((loglog_slope(&pts) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slopes_need_three_mesh_sizes() {
        let row = |h: f64, e: f64| ReportRow {
            case: 0,
            dim: 2,
            divisions: None,
            degree: 1,
            dim_v: 1,
            free_dofs: 1,
            n: 1,
            h,
            radius: 0.0,
            overlap: 1,
            epsilon: 1e-3,
            energy_error: e,
            galerkin_error: e,
            reduction_error: None,
            trace_dim: 0,
            dim_lambda: 1,
            nnz_proxy: 0,
            cg_iters: 0,
            converged: true,
            kappa: None,
            reduction: 0.0,
            k: vec![],
        };
        assert!(slopes(&[row(0.5, 0.5), row(0.25, 0.25)], &[1e-3]).is_empty());
        let s = slopes(
            &[row(0.5, 0.5), row(0.25, 0.25), row(0.125, 0.125)],
            &[1e-3],
        );
        assert_eq!(s.len(), 1);
        assert!((s[0].slope - 1.0).abs() < 1e-12);
        assert_eq!(
            row(0.5, 0.5).csv().split(',').count(),
            REPORT_HEADER.split(',').count()
        );
    }
}
