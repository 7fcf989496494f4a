//! Per-subdomain model order reduction: discrete harmonic lifting from the
//! extended subdomain, weighted truncated SVD and the diagonalized reduced
//! basis.

mod bundle;
mod extended;
mod svd;

use std::time::Instant;

pub use bundle::{build_reduced_bundle, ReducedBundle};
pub use extended::{core_weight, ExtendedSystem};
pub use svd::{weighted_truncated_svd, WeightedSvd};

use crate::hybrid::{LocalBlocks, SubdomainProblem};

#[derive(Debug, thiserror::Error)]
pub enum MorError {
    #[error("truncation tolerance must be positive, got {0}")]
    Epsilon(f64),
    #[error("reduced stiffness of subdomain {subdomain} has non-positive eigenvalue {value:e}")]
    NonPositiveLambda { subdomain: usize, value: f64 },
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// Wall-clock seconds per phase of [`reduce_subdomain`].
#[derive(Clone, Debug, Default)]
pub struct ReductionTimings {
    pub assembly: f64,
    pub lifting: f64,
    pub weights: f64,
    pub svd: f64,
    pub bundles: f64,
}

/// Runs the whole reduction pipeline of one subdomain, producing one bundle
/// per tolerance from a single SVD.
pub fn reduce_subdomain(
    problem: &SubdomainProblem,
    epsilons: &[f64],
    keep_q: bool,
) -> Result<(Vec<ReducedBundle>, ReductionTimings), MorError> {
    if let Some(&bad) = epsilons.iter().find(|&&e| !(e > 0.0)) {
        return Err(MorError::Epsilon(bad));
    }
    let mut timings = ReductionTimings::default();
    let clock = Instant::now();
    let spaces = problem.spaces();
    let blocks = LocalBlocks::assemble(problem, &spaces);
    let ext = ExtendedSystem::build(problem, &spaces)?;
    timings.assembly = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let z = ext.lifting_matrix();
    let wf = ext.particular_solution();
    timings.lifting = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let m = core_weight(&blocks, problem.h);
    let n = ext.trace_weight()?;
    timings.weights = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let svd = WeightedSvd::new(&z, &m, &n)?;
    timings.svd = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let k = svd.rank(eps);
        let mut b = build_reduced_bundle(&svd.truncated_basis(k), &wf, &blocks, &m, keep_q)?;
        b.epsilon = eps;
        b.n_ext = ext.n_ext();
        b.n_boundary = ext.n_boundary();
        b.sigma = svd.sigma.clone();
        out.push(b);
    }
    timings.bundles = clock.elapsed().as_secs_f64();
    log::info!(
        "subdomain {}: m = {}, ext = {}, K = {}, k = {:?}, times {:?}",
        problem.subdomain,
        ext.n_core(),
        ext.n_ext(),
        ext.n_boundary(),
        out.iter().map(|b| b.k).collect::<Vec<_>>(),
        timings
    );
    Ok((out, timings))
}
