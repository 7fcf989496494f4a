use faer::Mat;

use crate::fem::CsrMatrix;
use crate::linalg::SparseCholesky;
use crate::solver::{pcg, LinearOperator, PcgOptions};

use super::{HybridError, LocalBlocks};

/// Unreduced two-step solution.
#[derive(Clone, Debug)]
pub struct FullSolution {
    pub beta: Vec<Vec<f64>>,
    pub beta0: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `beta_i^T K_i beta_i` per subdomain.
    pub energies: Vec<f64>,
}

/// `C - sum_i B_i^T A_i^{-1} B_i` with dense local Schur blocks.
struct FullSchur<'a> {
    c: &'a CsrMatrix,
    parts: Vec<(&'a [usize], Mat<f64>)>,
}

impl LinearOperator for FullSchur<'_> {
    fn dim(&self) -> usize {
        self.c.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.c.matvec_add(x, y, 1.0);
        for (global, s) in &self.parts {
            let loc: Vec<f64> = global.iter().map(|&g| x[g]).collect();
            for (r, &g) in global.iter().enumerate() {
                y[g] -= (0..loc.len()).map(|c| s[(r, c)] * loc[c]).sum::<f64>();
            }
        }
    }
}

/// Solves the full hybrid system by eliminating the subdomain unknowns:
/// `(C - B^T A^{-1} B) beta0 = -B^T A^{-1} f`, then `beta = A^{-1}(f - B beta0)`.
pub fn solve_full_nitsche(
    blocks: &[LocalBlocks],
    c: &CsrMatrix,
    opts: &PcgOptions,
) -> Result<FullSolution, HybridError> {
    let k = c.nrows;
    let mut factors = Vec::with_capacity(blocks.len());
    let mut parts = Vec::with_capacity(blocks.len());
    let mut rhs = vec![0.0; k];
    let mut diag = c.diagonal();
    for blk in blocks {
        let chol = SparseCholesky::new(&blk.a, &format!("A_{}", blk.subdomain))
            .map_err(|_| HybridError::Coercivity(blk.subdomain))?;
        let m = blk.a.nrows;
        let kl = blk.b.ncols;
        let mut w = blk.b.to_dense();
        chol.solve_in_place(w.as_mut());
        // S_i = B^T A^{-1} B
        let mut s = Mat::<f64>::zeros(kl, kl);
        for r in 0..m {
            for (col, v) in blk.b.row(r) {
                for c2 in 0..kl {
                    s[(col, c2)] += v * w[(r, c2)];
                }
            }
        }
        let af = chol.solve(&blk.f);
        let g = blk.b.matvec_t(&af);
        for (l, &gl) in blk.trace_global.iter().enumerate() {
            rhs[gl] -= g[l];
            diag[gl] -= s[(l, l)];
        }
        parts.push((&blk.trace_global[..], s));
        factors.push(chol);
    }
    let op = FullSchur { c, parts };
    let (beta0, iterations, converged) = if k == 0 {
        (Vec::new(), 0, true)
    } else {
        let out = pcg(&op, &diag, &rhs, opts);
        (out.x, out.iterations, out.converged)
    };
    let mut beta = Vec::with_capacity(blocks.len());
    let mut energies = Vec::with_capacity(blocks.len());
    for (blk, chol) in blocks.iter().zip(&factors) {
        let loc: Vec<f64> = blk.trace_global.iter().map(|&g| beta0[g]).collect();
        let mut r = blk.f.clone();
        blk.b.matvec_add(&loc, &mut r, -1.0);
        let bi = chol.solve(&r);
        energies.push(blk.stiffness.bilinear(&bi, &bi));
        beta.push(bi);
    }
    Ok(FullSolution {
        beta,
        beta0,
        iterations,
        converged,
        energies,
    })
}

/// `(1 - sum_i E_i)^{1/2}` for a load whose exact solution has unit energy.
/// A negative radicand (energy above one) is returned as `-sqrt(|.|)` with a
/// warning.
pub fn energy_error(energies: &[f64]) -> f64 {
    signed_sqrt(1.0 - energies.iter().sum::<f64>(), "energy error")
}

/// `(sum_i |E_i^C - E_i|)^{1/2}`.
pub fn reduction_error(conforming: &[f64], reduced: &[f64]) -> f64 {
    assert_eq!(conforming.len(), reduced.len());
    conforming
        .iter()
        .zip(reduced)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        .sqrt()
}

fn signed_sqrt(x: f64, what: &str) -> f64 {
    if x < 0.0 {
        log::warn!("{what}: negative radicand {x:e}, energy exceeds the exact value");
        -(-x).sqrt()
    } else {
        x.sqrt()
    }
}
