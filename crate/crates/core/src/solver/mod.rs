//! Matrix-free preconditioned conjugate gradients for the reduced Schur
//! complement system, back substitution and condition estimates.

mod pcg;
mod schur;

pub use pcg::{lanczos_condition, pcg, DenseOperator, LinearOperator, PcgOptions, PcgOutcome};
pub use schur::{back_substitute, schur_apply, solve_reduced, SchurProblem, Solution};

#[cfg(test)]
mod tests;
