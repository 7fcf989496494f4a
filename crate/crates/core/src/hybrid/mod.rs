//! Hybrid Nitsche coupling of subdomain spaces through a skeleton trace
//! variable, the unreduced two-step solve and the energy error measures.

mod blocks;
mod decomposition;
mod full;
mod problem;
mod trace;

pub use blocks::{assemble_c, assemble_c_from_blocks, assemble_local_blocks, LocalBlocks};
pub use decomposition::Decomposition;
pub use full::{energy_error, reduction_error, solve_full_nitsche, FullSolution};
pub use problem::{InterfaceFacet, LocalSpaces, SubdomainProblem};
pub use trace::{LocalTrace, TraceSpace};

#[derive(Debug, thiserror::Error)]
pub enum HybridError {
    #[error("penalty parameter alpha must be positive, got {0}")]
    Alpha(f64),
    #[error("subdomain {0} is empty")]
    EmptySubdomain(usize),
    #[error("subdomain {0} has no interface facets")]
    NoInterface(usize),
    #[error("A_{0} is not positive definite: alpha violates the coercivity condition")]
    Coercivity(usize),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}
