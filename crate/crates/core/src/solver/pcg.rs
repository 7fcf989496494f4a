use faer::{Mat, Side};

use crate::linalg::dot;

/// Symmetric positive definite operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcgOptions {
    /// Stop when the preconditioned residual norm has dropped by this factor.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Extreme eigenvalue ratio of the Lanczos matrix built from the CG
    /// coefficients; `None` before the first iteration.
    pub kappa: Option<f64>,
    /// Relative preconditioned residual `sqrt(r^T z / r0^T z0)` per iteration,
    /// starting with 1.
    pub residuals: Vec<f64>,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn pcg(op: &impl LinearOperator, diag: &[f64], b: &[f64], opts: &PcgOptions) -> PcgOutcome {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(diag.len(), n);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut rz = dot(&r, &z);
    let mut residuals = vec![1.0];
    if rz == 0.0 {
        return PcgOutcome {
            x,
            iterations: 0,
            converged: true,
            kappa: None,
            residuals,
        };
    }
    let rz0 = rz;
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            log::warn!("pcg: non-positive curvature {pap:e} at iteration {iterations}");
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        alphas.push(alpha);
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let rel = (rz_new.max(0.0) / rz0).sqrt();
        residuals.push(rel);
        if rel <= opts.tol {
            converged = true;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rz = rz_new;
    }
    PcgOutcome {
        x,
        iterations,
        converged,
        kappa: lanczos_condition(&alphas, &betas),
        residuals,
    }
}

/// Condition number of the Lanczos tridiagonal matrix implied by CG step
/// lengths `alphas` and direction updates `betas`.
pub fn lanczos_condition(alphas: &[f64], betas: &[f64]) -> Option<f64> {
    let m = alphas.len();
    if m == 0 {
        return None;
    }
    let mut t = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / alphas[j]
            + if j > 0 {
                betas[j - 1] / alphas[j - 1]
            } else {
                0.0
            };
        if j + 1 < m {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let ev = t.self_adjoint_eigenvalues(Side::Lower).ok()?;
    let (lo, hi) = (ev[0], ev[m - 1]);
    (lo > 0.0).then(|| hi / lo)
}

/// Dense matrix as an operator (tests and tiny instances).
pub struct DenseOperator(pub Mat<f64>);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..x.len()).map(|j| self.0[(i, j)] * x[j]).sum();
        }
    }
}

impl LinearOperator for crate::fem::CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.matvec_add(x, y, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Mat::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut a = &g * g.transpose();
        for i in 0..n {
            a[(i, i)] += 0.1 * (i + 1) as f64;
        }
        a
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let a = DenseOperator(random_spd(5, 1));
        let out = pcg(&a, &[1.0; 5], &[0.0; 5], &PcgOptions::default());
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solves_and_estimates_condition() {
        let n = 30;
        let a = random_spd(n, 7);
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let op = DenseOperator(a.clone());
        let out = pcg(
            &op,
            &diag,
            &b,
            &PcgOptions {
                tol: 1e-12,
                max_iters: 500,
            },
        );
        assert!(out.converged);
        let mut ax = vec![0.0; n];
        op.apply(&out.x, &mut ax);
        let err: f64 = ax
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");

        // dense spectrum of D^{-1/2} A D^{-1/2}
        let s = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)] / (diag[i] * diag[j]).sqrt());
        let ev = s.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let exact = ev[n - 1] / ev[0];
        let est = out.kappa.unwrap();
        assert!((est / exact - 1.0).abs() < 0.2, "{est} vs {exact}");
    }
}
