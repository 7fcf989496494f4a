use faer::Mat;

use crate::fem::CsrMatrix;
use crate::hybrid::LocalBlocks;
use crate::linalg::symmetric_eigen;

use super::MorError;

/// Reduced representation of one subdomain: everything the main process
/// needs for the reduced Schur system and the error measures.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedBundle {
    pub subdomain: usize,
    pub epsilon: f64,
    /// Singular directions kept.
    pub k: usize,
    /// Whether the particular solution added a direction.
    pub with_particular: bool,
    /// Core DOFs `m_i`, extended DOFs and extension boundary DOFs `K_i`.
    pub n_core: usize,
    pub n_ext: usize,
    pub n_boundary: usize,
    /// Diagonal of `Q^T A Q`.
    pub lambda: Vec<f64>,
    /// `Q^T B` (`k~ x` local trace DOFs).
    pub b: Mat<f64>,
    pub trace_global: Vec<usize>,
    pub f: Vec<f64>,
    /// `Q^T K Q`.
    pub stiffness: Mat<f64>,
    /// `sum_j b_jk^2 / lambda_j` per local trace DOF.
    pub precond: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `Q` itself (`m_i x k~`), kept when core solutions are wanted.
    pub q: Option<Mat<f64>>,
    /// This subdomain's contribution to `C`, local trace numbering.
    pub c_local: CsrMatrix,
}

impl ReducedBundle {
    /// Reduced dimension `k~`.
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }
}

fn dense_matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (yi, mij) in y.iter_mut().zip(m.col_as_slice(j)) {
                *yi += mij * xj;
            }
        }
    }
    y
}

fn m_dot(m: &Mat<f64>, x: &[f64], y: &[f64]) -> f64 {
    dense_matvec(m, y).iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Builds `Q = [U_k | q_f] V` where `q_f` is `w^f` made M-orthogonal to
/// `U_k` (dropped when negligible) and `V` diagonalizes the projected `A`.
pub fn build_reduced_bundle(
    basis: &Mat<f64>,
    wf: &[f64],
    blocks: &LocalBlocks,
    m_weight: &Mat<f64>,
    keep_q: bool,
) -> Result<ReducedBundle, MorError> {
    let m = basis.nrows();
    let k = basis.ncols();
    let wf_norm = m_dot(m_weight, wf, wf).max(0.0).sqrt();
    let mut qf = wf.to_vec();
    let mut with_particular = false;
    if wf_norm > 0.0 {
        // two passes of classical Gram-Schmidt in the M inner product
        for _ in 0..2 {
            let mq = dense_matvec(m_weight, &qf);
            for j in 0..k {
                let c: f64 = basis
                    .col_as_slice(j)
                    .iter()
                    .zip(&mq)
                    .map(|(a, b)| a * b)
                    .sum();
                for (q, b) in qf.iter_mut().zip(basis.col_as_slice(j)) {
                    *q -= c * b;
                }
            }
        }
        let r = m_dot(m_weight, &qf, &qf).max(0.0).sqrt();
        if r >= 1e-12 * wf_norm {
            qf.iter_mut().for_each(|v| *v /= r);
            with_particular = true;
        }
    }
    let kt = k + with_particular as usize;
    let mut q0 = Mat::<f64>::zeros(m, kt);
    q0.subcols_mut(0, k).copy_from(basis);
    if with_particular {
        q0.col_as_slice_mut(k).copy_from_slice(&qf);
    }

    let aq0 = sparse_times(&blocks.a, &q0);
    let mut a_hat = q0.transpose() * &aq0;
    for i in 0..kt {
        for j in i + 1..kt {
            let v = 0.5 * (a_hat[(i, j)] + a_hat[(j, i)]);
            a_hat[(i, j)] = v;
            a_hat[(j, i)] = v;
        }
    }
    let (lambda, v) = symmetric_eigen(a_hat.as_ref(), "projected A")?;
    if let Some(&bad) = lambda.iter().find(|&&l| !(l > 0.0)) {
        return Err(MorError::NonPositiveLambda {
            subdomain: blocks.subdomain,
            value: bad,
        });
    }
    let q = &q0 * &v;

    let kl = blocks.b.ncols;
    let mut b = Mat::<f64>::zeros(kt, kl);
    for a in 0..kt {
        for (l, val) in blocks.b.matvec_t(q.col_as_slice(a)).into_iter().enumerate() {
            b[(a, l)] = val;
        }
    }
    let f: Vec<f64> = (0..kt)
        .map(|a| {
            q.col_as_slice(a)
                .iter()
                .zip(&blocks.f)
                .map(|(x, y)| x * y)
                .sum()
        })
        .collect();
    let kq = sparse_times(&blocks.stiffness, &q);
    let stiffness = q.transpose() * &kq;
    let precond = (0..kl)
        .map(|l| (0..kt).map(|j| b[(j, l)] * b[(j, l)] / lambda[j]).sum())
        .collect();
    Ok(ReducedBundle {
        subdomain: blocks.subdomain,
        epsilon: f64::NAN,
        k,
        with_particular,
        n_core: m,
        n_ext: 0,
        n_boundary: 0,
        lambda,
        b,
        trace_global: blocks.trace_global.clone(),
        f,
        stiffness,
        precond,
        sigma: Vec::new(),
        q: keep_q.then_some(q),
        c_local: blocks.c_local.clone(),
    })
}

/// Sparse times dense, column by column.
pub(crate) fn sparse_times(a: &CsrMatrix, x: &Mat<f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows, x.ncols());
    for j in 0..x.ncols() {
        let col = a.matvec(x.col_as_slice(j));
        out.col_as_slice_mut(j).copy_from_slice(&col);
    }
    out
}
