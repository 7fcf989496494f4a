use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fem::Load;
use crate::hybrid::{
    assemble_c, assemble_c_from_blocks, reduction_error, solve_full_nitsche, Decomposition,
};
use crate::linalg::{dot, norm2};
use crate::mesh::{generate_structured_mesh, PartitionMethod};
use crate::mor::{reduce_subdomain, ReducedBundle};

fn bundles(
    dim: usize,
    divisions: usize,
    degree: usize,
    n: usize,
    r_over_h: f64,
    eps: f64,
    load: Load,
) -> (Decomposition, Vec<ReducedBundle>) {
    let mesh = generate_structured_mesh(dim, divisions).unwrap();
    let r = r_over_h * mesh.h();
    let d = Decomposition::new(mesh, degree, n, &PartitionMethod::Rcb, r).unwrap();
    let b = (0..n)
        .map(|i| {
            let p = d.problem(i, 0.01, load).unwrap();
            reduce_subdomain(&p, &[eps], true).unwrap().0.remove(0)
        })
        .collect();
    (d, b)
}

fn c_of(d: &Decomposition, b: &[ReducedBundle]) -> crate::fem::CsrMatrix {
    assemble_c(
        b.iter().map(|b| (&b.trace_global[..], &b.c_local)),
        d.trace.len(),
    )
}

fn tight() -> PcgOptions {
    PcgOptions {
        tol: 1e-14,
        max_iters: 1000,
    }
}

/// Dense `C - sum B~^T Lambda^{-1} B~` built independently of the operator.
fn dense_schur(c: &crate::fem::CsrMatrix, bundles: &[ReducedBundle]) -> Mat<f64> {
    let mut s = c.to_dense();
    for b in bundles {
        let mut scaled = b.b.clone();
        for j in 0..b.dim() {
            for l in 0..scaled.ncols() {
                scaled[(j, l)] /= b.lambda[j];
            }
        }
        let local = b.b.transpose() * &scaled;
        for (r, &gr) in b.trace_global.iter().enumerate() {
            for (cc, &gc) in b.trace_global.iter().enumerate() {
                s[(gr, gc)] -= local[(r, cc)];
            }
        }
    }
    s
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn schur_operator_is_spd_and_matches_the_dense_matrix() {
    let (d, b) = bundles(2, 6, 2, 4, 1.0, 1e-3, Load::Bubble);
    let sp = SchurProblem::new(c_of(&d, &b), &b, PcgOptions::default());
    let k = sp.dim();
    assert!(k > 0);
    assert!(schur_apply(&sp, &vec![0.0; k]).iter().all(|&v| v == 0.0));
    let dense = dense_schur(&sp.c, &b);
    let scale = dense.norm_max();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let y = random_vec(&mut rng, k);
        let z = random_vec(&mut rng, k);
        let sy = schur_apply(&sp, &y);
        let sz = schur_apply(&sp, &z);
        assert!(dot(&y, &sy) > 0.0);
        assert!((dot(&z, &sy) - dot(&y, &sz)).abs() <= 1e-12 * norm2(&y) * norm2(&z) * scale);
        for (r, v) in sy.iter().enumerate() {
            let expected: f64 = (0..k).map(|c| dense[(r, c)] * y[c]).sum();
            assert!((v - expected).abs() <= 1e-12 * scale * norm2(&y));
        }
    }
}

#[test]
fn preconditioner_is_the_exact_diagonal() {
    for (dim, divisions) in [(2, 6), (3, 3)] {
        let (d, b) = bundles(dim, divisions, 2, 4, 1.0, 1e-4, Load::Bubble);
        let sp = SchurProblem::new(c_of(&d, &b), &b, PcgOptions::default());
        let dense = dense_schur(&sp.c, &b);
        for (g, &p) in sp.precond_diag.iter().enumerate() {
            assert!(p > 0.0);
            assert!((p - dense[(g, g)]).abs() <= 1e-12 * dense[(g, g)]);
        }
        assert_eq!(sp.rhs.len(), sp.dim());
    }
}

#[test]
fn zero_load_gives_zero_reduced_solution() {
    let (d, b) = bundles(2, 6, 2, 4, 1.0, 1e-3, Load::Zero);
    let sp = SchurProblem::new(c_of(&d, &b), &b, PcgOptions::default());
    let sol = solve_reduced(&sp);
    assert_eq!(sol.iterations, 0);
    assert!(sol.beta0.iter().all(|&v| v == 0.0));
    assert!(sol.beta_tilde.iter().flatten().all(|&v| v == 0.0));
    assert!(sol.energies.iter().all(|&e| e == 0.0));
}

#[test]
fn back_substitution_solves_the_local_systems() {
    let (d, b) = bundles(3, 4, 2, 4, 1.0, 1e-3, Load::Bubble);
    let sp = SchurProblem::new(c_of(&d, &b), &b, PcgOptions::default());
    let sol = solve_reduced(&sp);
    assert!(sol.converged);
    assert!(sol.energies.iter().all(|&e| e >= 0.0));
    for (bundle, bt) in b.iter().zip(&sol.beta_tilde) {
        let loc: Vec<f64> = bundle.trace_global.iter().map(|&g| sol.beta0[g]).collect();
        let res: Vec<f64> = (0..bundle.dim())
            .map(|j| {
                let bb: f64 = (0..loc.len()).map(|l| bundle.b[(j, l)] * loc[l]).sum();
                bundle.lambda[j] * bt[j] + bb - bundle.f[j]
            })
            .collect();
        assert!(norm2(&res) <= 1e-12 * norm2(&bundle.f));
    }
    // reconstructed core coefficients reproduce the reduced energies
    let blocks = d.local_blocks(0.01, Load::Bubble).unwrap();
    for ((blk, beta), e) in blocks.iter().zip(&sol.beta).zip(&sol.energies) {
        let beta = beta.as_ref().unwrap();
        assert!((blk.stiffness.bilinear(beta, beta) - e).abs() <= 1e-10 * e);
    }
}

/// Fixtures where the lifting range plus the particular solution spans the
/// whole local space, so the reduction at a tiny tolerance is exact.
fn equivalence_fixtures() -> [(usize, usize, usize, usize, f64); 3] {
    [(2, 4, 1, 4, 0.5), (2, 8, 1, 16, 0.5), (3, 4, 1, 8, 0.5)]
}

#[test]
fn full_rank_reduction_reproduces_the_unreduced_solve() {
    for (dim, divisions, degree, n, r) in equivalence_fixtures() {
        let (d, b) = bundles(dim, divisions, degree, n, r, 1e-12, Load::Bubble);
        assert!(b.iter().all(|b| b.dim() == b.n_core));
        let sp = SchurProblem::new(c_of(&d, &b), &b, tight());
        let red = solve_reduced(&sp);
        let blocks = d.local_blocks(0.01, Load::Bubble).unwrap();
        let c = assemble_c_from_blocks(&blocks, &d.trace);
        let full = solve_full_nitsche(&blocks, &c, &tight()).unwrap();
        let diff: Vec<f64> = full
            .beta0
            .iter()
            .zip(&red.beta0)
            .map(|(a, b)| a - b)
            .collect();
        assert!(norm2(&diff) <= 1e-6 * norm2(&full.beta0));
        for (x, y) in full.energies.iter().zip(&red.energies) {
            assert!((x - y).abs() <= 1e-10 * x);
        }
    }
}

#[test]
fn reduced_energy_increases_as_the_tolerance_shrinks() {
    let mesh = generate_structured_mesh(3, 4).unwrap();
    let r = mesh.h();
    let d = Decomposition::new(mesh, 2, 4, &PartitionMethod::Rcb, r).unwrap();
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut per_eps: Vec<Vec<ReducedBundle>> = vec![Vec::new(); eps.len()];
    for i in 0..4 {
        let p = d.problem(i, 0.01, Load::Bubble).unwrap();
        for (k, b) in reduce_subdomain(&p, &eps, false)
            .unwrap()
            .0
            .into_iter()
            .enumerate()
        {
            per_eps[k].push(b);
        }
    }
    let blocks = d.local_blocks(0.01, Load::Bubble).unwrap();
    let c = assemble_c_from_blocks(&blocks, &d.trace);
    let full = solve_full_nitsche(&blocks, &c, &PcgOptions::default()).unwrap();
    let full_energy: f64 = full.energies.iter().sum();
    let energies: Vec<f64> = per_eps
        .iter()
        .map(|b| {
            let sp = SchurProblem::new(c_of(&d, b), b, PcgOptions::default());
            solve_reduced(&sp).energies.iter().sum()
        })
        .collect();
    // the reduced spaces are nested in the tolerance
    assert!(
        energies.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9)),
        "{energies:?}"
    );
    assert!(energies[3] <= full_energy * (1.0 + 1e-9));
    assert!(reduction_error(&full.energies, &full.energies) == 0.0);
}

#[test]
fn pcg_error_decreases_in_the_energy_norm() {
    let (d, b) = bundles(3, 4, 2, 4, 1.0, 1e-4, Load::Bubble);
    let sp = SchurProblem::new(c_of(&d, &b), &b, PcgOptions::default());
    let dense = dense_schur(&sp.c, &b);
    let exact = pcg(
        &DenseOperator(dense.clone()),
        &sp.precond_diag,
        &sp.rhs,
        &tight(),
    )
    .x;
    let full = solve_reduced(&sp);
    let energy_error = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&exact).map(|(a, b)| a - b).collect();
        dot(&e, &schur_apply(&sp, &e))
    };
    let mut last = f64::INFINITY;
    for iters in 0..=full.iterations {
        let opts = PcgOptions {
            tol: sp.options.tol,
            max_iters: iters,
        };
        let x = pcg(&sp, &sp.precond_diag, &sp.rhs, &opts).x;
        let e = energy_error(&x);
        assert!(e <= last * (1.0 + 1e-10) + 1e-28, "iteration {iters}");
        last = e;
    }
    // the preconditioned residual itself need not decrease monotonically
    assert_eq!(full.residuals.len(), full.iterations + 1);
    assert!(full.residuals.last().unwrap() <= &sp.options.tol);
}
