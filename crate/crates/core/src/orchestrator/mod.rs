//! File-based workflow: the main process partitions the mesh and writes one
//! task per subdomain, independent workers reduce their subdomain and write a
//! result bundle, and the main process assembles and solves the reduced
//! Schur system.

pub mod bundles;
pub mod config;
pub mod format;
pub mod study;
pub mod workers;

use std::path::PathBuf;

pub use bundles::{ResultBundle, SubdomainSolution, TaskBundle};
pub use config::{Case, ConfigError, MeshSource, Radius, RunConfig, StudyMode};
pub use format::FormatError;
pub use study::{run_study, ReportRow, Slope, StudyReport, Timing};
pub use workers::{run_task, run_workers, Executor, WorkerOptions, CRASH_ENV};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Hybrid(#[from] crate::hybrid::HybridError),
    #[error(transparent)]
    Mor(#[from] crate::mor::MorError),
    #[error(transparent)]
    Fem(#[from] crate::fem::FemError),
    #[error("worker for subdomain {subdomain} failed: {message}")]
    Worker { subdomain: usize, message: String },
    #[error("no result bundle for subdomain {0}")]
    MissingBundle(usize),
    #[error("two result bundles for subdomain {0}")]
    DuplicateBundle(usize),
    #[error("result bundle names unknown subdomain {0}")]
    UnexpectedBundle(usize),
    #[error("trace DOFs of subdomain {0} do not match the skeleton")]
    TraceMismatch(usize),
    #[error("tolerances in the bundle of subdomain {0} do not match the run")]
    EpsilonMismatch(usize),
    #[error("{0} is not deterministic")]
    Nondeterministic(String),
}
