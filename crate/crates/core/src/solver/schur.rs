use crate::fem::CsrMatrix;
use crate::mor::ReducedBundle;

use super::{pcg, LinearOperator, PcgOptions};

/// Reduced Schur complement system `(C - sum B~^T Lambda^{-1} B~) beta0 = rhs`.
pub struct SchurProblem<'a> {
    pub c: CsrMatrix,
    pub bundles: &'a [ReducedBundle],
    pub rhs: Vec<f64>,
    pub precond_diag: Vec<f64>,
    pub options: PcgOptions,
}

/// Reduced solution.
#[derive(Clone, Debug)]
pub struct Solution {
    pub beta0: Vec<f64>,
    pub beta_tilde: Vec<Vec<f64>>,
    /// Core coefficients `Q beta~` where `Q` was kept.
    pub beta: Vec<Option<Vec<f64>>>,
    /// `beta~^T K~ beta~` per subdomain.
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kappa: Option<f64>,
    pub residuals: Vec<f64>,
}

impl<'a> SchurProblem<'a> {
    pub fn new(c: CsrMatrix, bundles: &'a [ReducedBundle], options: PcgOptions) -> Self {
        let k = c.nrows;
        let mut rhs = vec![0.0; k];
        let mut precond_diag = c.diagonal();
        for b in bundles {
            for (l, &g) in b.trace_global.iter().enumerate() {
                let mut acc = 0.0;
                for j in 0..b.dim() {
                    acc += b.b[(j, l)] * b.f[j] / b.lambda[j];
                }
                rhs[g] -= acc;
                precond_diag[g] -= b.precond[l];
            }
        }
        Self {
            c,
            bundles,
            rhs,
            precond_diag,
            options,
        }
    }

    pub fn dim(&self) -> usize {
        self.c.nrows
    }
}

impl LinearOperator for SchurProblem<'_> {
    fn dim(&self) -> usize {
        self.c.nrows
    }

    fn apply(&self, y: &[f64], out: &mut [f64]) {
        schur_apply_into(self, y, out);
    }
}

fn schur_apply_into(problem: &SchurProblem<'_>, y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    problem.c.matvec_add(y, out, 1.0);
    for b in problem.bundles {
        let kl = b.trace_global.len();
        let yl: Vec<f64> = b.trace_global.iter().map(|&g| y[g]).collect();
        // t = Lambda^{-1} B~ y
        let mut t = vec![0.0; b.dim()];
        for l in 0..kl {
            if yl[l] != 0.0 {
                for (tj, bj) in t.iter_mut().zip(b.b.col_as_slice(l)) {
                    *tj += bj * yl[l];
                }
            }
        }
        for (tj, lj) in t.iter_mut().zip(&b.lambda) {
            *tj /= lj;
        }
        for (l, &g) in b.trace_global.iter().enumerate() {
            out[g] -=
                b.b.col_as_slice(l)
                    .iter()
                    .zip(&t)
                    .map(|(x, y)| x * y)
                    .sum::<f64>();
        }
    }
}

/// `C y - sum_i B~_i^T Lambda_i^{-1} B~_i y` without forming the matrix.
pub fn schur_apply(problem: &SchurProblem<'_>, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; problem.dim()];
    schur_apply_into(problem, y, &mut out);
    out
}

/// `beta~_i = Lambda_i^{-1}(f~_i - B~_i beta0)` with energies and, where the
/// basis is available, core coefficients.
pub fn back_substitute(problem: &SchurProblem<'_>, beta0: &[f64]) -> Solution {
    let mut beta_tilde = Vec::with_capacity(problem.bundles.len());
    let mut beta = Vec::with_capacity(problem.bundles.len());
    let mut energies = Vec::with_capacity(problem.bundles.len());
    for b in problem.bundles {
        let mut t = b.f.clone();
        for (l, &g) in b.trace_global.iter().enumerate() {
            let y = beta0[g];
            if y != 0.0 {
                for (tj, bj) in t.iter_mut().zip(b.b.col_as_slice(l)) {
                    *tj -= bj * y;
                }
            }
        }
        for (tj, lj) in t.iter_mut().zip(&b.lambda) {
            *tj /= lj;
        }
        let mut e = 0.0;
        for i in 0..t.len() {
            for j in 0..t.len() {
                e += t[i] * b.stiffness[(i, j)] * t[j];
            }
        }
        energies.push(e);
        beta.push(b.q.as_ref().map(|q| {
            (0..q.nrows())
                .map(|r| (0..t.len()).map(|j| q[(r, j)] * t[j]).sum())
                .collect()
        }));
        beta_tilde.push(t);
    }
    Solution {
        beta0: beta0.to_vec(),
        beta_tilde,
        beta,
        energies,
        iterations: 0,
        converged: true,
        kappa: None,
        residuals: Vec::new(),
    }
}

/// PCG on the reduced system followed by back substitution.
pub fn solve_reduced(problem: &SchurProblem<'_>) -> Solution {
    if problem.dim() == 0 {
        return back_substitute(problem, &[]);
    }
    let out = pcg(
        problem,
        &problem.precond_diag,
        &problem.rhs,
        &problem.options,
    );
    let mut sol = back_substitute(problem, &out.x);
    sol.iterations = out.iterations;
    sol.converged = out.converged;
    sol.kappa = out.kappa;
    sol.residuals = out.residuals;
    sol
}
