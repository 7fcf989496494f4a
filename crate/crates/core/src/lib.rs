//! Hybrid Nitsche domain decomposition for the Poisson problem with
//! per-subdomain model order reduction.

pub mod fem;
pub mod hybrid;
pub mod linalg;
pub mod mesh;
pub mod mor;
pub mod orchestrator;
pub mod solver;
