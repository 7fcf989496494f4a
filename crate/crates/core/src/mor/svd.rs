use faer::Mat;

use crate::linalg::{dense_cholesky, solve_lower, solve_lower_transpose, thin_svd};

use super::MorError;

/// SVD of `L_M^T Z L_N^{-T}` where `M = L_M L_M^T` and `N = L_N L_N^T`.
pub struct WeightedSvd {
    /// Nonincreasing singular values.
    pub sigma: Vec<f64>,
    /// Left singular vectors mapped back: `L_M^{-T} U`, M-orthonormal.
    pub basis: Mat<f64>,
    pub u: Mat<f64>,
    pub v: Mat<f64>,
    pub l_m: Mat<f64>,
    pub l_n: Mat<f64>,
}

impl WeightedSvd {
    pub fn new(z: &Mat<f64>, m: &Mat<f64>, n: &Mat<f64>) -> Result<Self, MorError> {
        let l_m = dense_cholesky(m.as_ref(), "core weight M")?;
        let l_n = dense_cholesky(n.as_ref(), "trace weight N")?;
        // A^T = L_N^{-1} (L_M^T Z)^T
        let mut at = (l_m.transpose() * z).transpose().to_owned();
        solve_lower(l_n.as_ref(), at.as_mut());
        let (u, sigma, v) = thin_svd(at.transpose(), "weighted lifting matrix")?;
        let mut basis = u.clone();
        solve_lower_transpose(l_m.as_ref(), basis.as_mut());
        Ok(Self {
            sigma,
            basis,
            u,
            v,
            l_m,
            l_n,
        })
    }

    /// `#{sigma_j > eps}`.
    pub fn rank(&self, eps: f64) -> usize {
        self.sigma.iter().take_while(|&&s| s > eps).count()
    }

    /// First `k` M-orthonormal basis columns.
    pub fn truncated_basis(&self, k: usize) -> Mat<f64> {
        self.basis.subcols(0, k).to_owned()
    }

    /// Rank-`k` approximation `L_M^{-T} U_k S_k V_k^T L_N^T` of `Z`.
    pub fn approximation(&self, k: usize) -> Mat<f64> {
        let mut us = self.u.subcols(0, k).to_owned();
        for j in 0..k {
            for i in 0..us.nrows() {
                us[(i, j)] *= self.sigma[j];
            }
        }
        let mut z = &us * (self.l_n.as_ref() * self.v.subcols(0, k)).transpose();
        solve_lower_transpose(self.l_m.as_ref(), z.as_mut());
        z
    }
}

/// Truncated weighted SVD: the M-orthonormal basis of the `k = #{sigma > eps}`
/// leading directions and the full singular value list.
pub fn weighted_truncated_svd(
    z: &Mat<f64>,
    m: &Mat<f64>,
    n: &Mat<f64>,
    eps: f64,
) -> Result<(Mat<f64>, Vec<f64>), MorError> {
    if !(eps > 0.0) {
        return Err(MorError::Epsilon(eps));
    }
    let svd = WeightedSvd::new(z, m, n)?;
    let k = svd.rank(eps);
    Ok((svd.truncated_basis(k), svd.sigma))
}
