//! Thin wrappers over faer factorizations.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt as SparseLlt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut, MatRef, Par, Side};

use crate::fem::CsrMatrix;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: String },
    #[error("{what}: {message}")]
    Factorization { what: String, message: String },
}

/// Forces single-threaded kernels so results do not depend on scheduling.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(Par::Seq);
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    n: usize,
    llt: Option<SparseLlt<usize, f64>>,
}

impl SparseCholesky {
    /// Factors `a`, reading only its lower triangle.
    pub fn new(a: &CsrMatrix, what: &str) -> Result<Self, LinalgError> {
        assert_eq!(a.nrows, a.ncols);
        if a.nrows == 0 {
            return Ok(Self { n: 0, llt: None });
        }
        // CSR of a symmetric matrix read as CSC of its transpose; keep r >= c
        let mut triplets = Vec::with_capacity(a.nnz() / 2 + a.nrows);
        for r in 0..a.nrows {
            for (c, v) in a.row(r) {
                if c <= r {
                    triplets.push(Triplet::new(r, c, v));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &triplets)
            .map_err(|e| LinalgError::Factorization {
                what: what.to_string(),
                message: format!("{e:?}"),
            })?;
        let llt = mat.sp_cholesky(Side::Lower).map_err(|e| match e {
            faer::sparse::linalg::LltError::Numeric(_) => LinalgError::NotPositiveDefinite {
                what: what.to_string(),
            },
            other => LinalgError::Factorization {
                what: what.to_string(),
                message: format!("{other:?}"),
            },
        })?;
        Ok(Self {
            n: a.nrows,
            llt: Some(llt),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for every column of `rhs`.
    pub fn solve_in_place(&self, rhs: MatMut<'_, f64>) {
        if let Some(llt) = &self.llt {
            llt.solve_in_place(rhs);
        }
    }
}

/// Dense Cholesky factor `L` with `A = L L^T`.
pub fn dense_cholesky(a: MatRef<'_, f64>, what: &str) -> Result<Mat<f64>, LinalgError> {
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let llt = a
        .llt(Side::Lower)
        .map_err(|_| LinalgError::NotPositiveDefinite {
            what: what.to_string(),
        })?;
    Ok(llt.L().to_owned())
}

/// Solves `L X = B` in place.
pub fn solve_lower(l: MatRef<'_, f64>, rhs: MatMut<'_, f64>) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, rhs, Par::Seq);
}

/// Solves `L^T X = B` in place.
pub fn solve_lower_transpose(l: MatRef<'_, f64>, rhs: MatMut<'_, f64>) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), rhs, Par::Seq);
}

/// Symmetric eigendecomposition with eigenvalues in nondecreasing order.
pub fn symmetric_eigen(
    a: MatRef<'_, f64>,
    what: &str,
) -> Result<(Vec<f64>, Mat<f64>), LinalgError> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LinalgError::Factorization {
            what: what.to_string(),
            message: format!("{e:?}"),
        })?;
    let s = evd.S();
    let values = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Thin SVD `A = U diag(s) V^T`, singular values nonincreasing.
pub fn thin_svd(
    a: MatRef<'_, f64>,
    what: &str,
) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>), LinalgError> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok((
            Mat::zeros(a.nrows(), 0),
            Vec::new(),
            Mat::zeros(a.ncols(), 0),
        ));
    }
    let svd = a.thin_svd().map_err(|e| LinalgError::Factorization {
        what: what.to_string(),
        message: format!("{e:?}"),
    })?;
    let s = svd.S();
    let values = (0..k).map(|i| s[i]).collect();
    Ok((svd.U().to_owned(), values, svd.V().to_owned()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
