//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # unit cube, 24389 P2 nodes
//! dim = 3
//! divisions = 14
//! subdomains = 10
//! radius = 4h
//! epsilon = 1e-2, 1e-3, 1e-4
//! study = eps-sweep
//! ```
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `dim` | 3 | dimension of the generated unit square or cube |
//! | `divisions` | 8 | cells per axis; a list drives an h-sweep |
//! | `mesh` | | Gmsh v2.2 file used instead of a generated mesh |
//! | `degree` | 2 | polynomial degree, 1 or 2 |
//! | `subdomains` | 4 | subdomain count; a list drives an n-sweep |
//! | `partition` | `rcb` | `rcb` or `file` |
//! | `partition_file` | | one subdomain id per element line |
//! | `radius` | `4h` | extension radius, absolute or a multiple of `h` |
//! | `epsilon` | `1e-3` | truncation tolerances |
//! | `alpha` | 0.01 | Nitsche penalty parameter |
//! | `load` | `bubble` | `bubble`, `one` or `zero` |
//! | `tol` | 1e-10 | relative preconditioned residual for PCG |
//! | `max_iters` | 10000 | PCG iteration cap |
//! | `workers` | 1 | concurrent worker processes |
//! | `out` | `out` | output directory |
//! | `study` | `single` | `single`, `h-sweep`, `eps-sweep` or `n-sweep` |
//! | `oracle` | `off` | conforming reference solve for the reduction error |
//! | `solutions` | `on` | write `solution_<i>.bin` files |
//!
//! When both `divisions` and `subdomains` are lists they must have equal
//! length and are paired; otherwise every mesh runs with every count.
//! Relative paths are resolved against the configuration file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::fem::Load;
use crate::mesh::PartitionMethod;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    /// Unit square or cube with the listed per-axis divisions.
    Generated {
        dim: usize,
        divisions: Vec<usize>,
    },
    Msh(PathBuf),
}

/// Extension radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Radius {
    /// Multiple of the global maximum element diameter.
    TimesH(f64),
    Absolute(f64),
}

impl Radius {
    pub fn resolve(self, h: f64) -> f64 {
        match self {
            Radius::TimesH(c) => c * h,
            Radius::Absolute(r) => r,
        }
    }
}

impl FromStr for Radius {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad radius {s:?}: {e}"))
        };
        let r = match s.strip_suffix('h') {
            Some("") => Radius::TimesH(1.0),
            Some(c) => Radius::TimesH(parse(c.trim_end_matches('*'))?),
            None => Radius::Absolute(parse(s)?),
        };
        match r {
            Radius::TimesH(v) | Radius::Absolute(v) if v >= 0.0 && v.is_finite() => Ok(r),
            _ => Err(format!("radius must be non-negative, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyMode {
    Single,
    HSweep,
    EpsSweep,
    NSweep,
}

impl FromStr for StudyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(StudyMode::Single),
            "h-sweep" => Ok(StudyMode::HSweep),
            "eps-sweep" => Ok(StudyMode::EpsSweep),
            "n-sweep" => Ok(StudyMode::NSweep),
            _ => Err(format!("unknown study mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub degree: usize,
    pub subdomains: Vec<usize>,
    pub partition: PartitionMethod,
    pub radius: Radius,
    pub epsilons: Vec<f64>,
    pub alpha: f64,
    pub load: Load,
    pub tol: f64,
    pub max_iters: usize,
    pub workers: usize,
    pub out: PathBuf,
    pub study: StudyMode,
    pub oracle: bool,
    pub solutions: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshSource::Generated {
                dim: 3,
                divisions: vec![8],
            },
            degree: 2,
            subdomains: vec![4],
            partition: PartitionMethod::Rcb,
            radius: Radius::TimesH(4.0),
            epsilons: vec![1e-3],
            alpha: 0.01,
            load: Load::Bubble,
            tol: 1e-10,
            max_iters: 10_000,
            workers: 1,
            out: PathBuf::from("out"),
            study: StudyMode::Single,
            oracle: false,
            solutions: true,
        }
    }
}

/// One (mesh, subdomain count) combination of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    /// Per-axis divisions of a generated mesh; `None` for a mesh file.
    pub divisions: Option<usize>,
    pub n: usize,
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| format!("bad value {:?}: {e}", t.trim()))
        })
        .collect()
}

fn switch(v: &str) -> Result<bool, String> {
    match v {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got {v:?}")),
    }
}

impl RunConfig {
    /// Parses configuration text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut dim = 3;
        let mut divisions = vec![8];
        let mut mesh_path = None;
        let mut partition = "rcb".to_string();
        let mut partition_file = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Syntax { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let path = |v: &str| {
                let p = PathBuf::from(v);
                if p.is_relative() {
                    base.join(p)
                } else {
                    p
                }
            };
            match key {
                "dim" => dim = value.parse().map_err(|e| err(format!("dim: {e}")))?,
                "divisions" => divisions = list(value).map_err(err)?,
                "mesh" => mesh_path = Some(path(value)),
                "degree" => cfg.degree = value.parse().map_err(|e| err(format!("degree: {e}")))?,
                "subdomains" => cfg.subdomains = list(value).map_err(err)?,
                "partition" => partition = value.to_string(),
                "partition_file" => partition_file = Some(path(value)),
                "radius" => cfg.radius = value.parse().map_err(err)?,
                "epsilon" => cfg.epsilons = list(value).map_err(err)?,
                "alpha" => cfg.alpha = value.parse().map_err(|e| err(format!("alpha: {e}")))?,
                "load" => cfg.load = value.parse().map_err(err)?,
                "tol" => cfg.tol = value.parse().map_err(|e| err(format!("tol: {e}")))?,
                "max_iters" => {
                    cfg.max_iters = value.parse().map_err(|e| err(format!("max_iters: {e}")))?
                }
                "workers" => {
                    cfg.workers = value.parse().map_err(|e| err(format!("workers: {e}")))?
                }
                "out" => cfg.out = path(value),
                "study" => cfg.study = value.parse().map_err(err)?,
                "oracle" => cfg.oracle = switch(value).map_err(err)?,
                "solutions" => cfg.solutions = switch(value).map_err(err)?,
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        cfg.mesh = match mesh_path {
            Some(p) => MeshSource::Msh(p),
            None => MeshSource::Generated { dim, divisions },
        };
        cfg.partition = match (partition.as_str(), partition_file) {
            ("rcb", _) => PartitionMethod::Rcb,
            ("file", Some(p)) => PartitionMethod::File(p),
            ("file", None) => {
                return Err(ConfigError::Invalid(
                    "partition = file needs partition_file".into(),
                ))
            }
            (other, _) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown partition method {other:?}"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, super::OrchestratorError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| super::OrchestratorError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(Self::parse(&text, base)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let divisions = match &self.mesh {
            MeshSource::Generated { dim, divisions } => {
                if *dim != 2 && *dim != 3 {
                    return bad(format!("dim must be 2 or 3, got {dim}"));
                }
                if divisions.is_empty() || divisions.contains(&0) {
                    return bad("divisions must be positive".into());
                }
                divisions.len()
            }
            MeshSource::Msh(_) => 1,
        };
        if self.degree != 1 && self.degree != 2 {
            return bad(format!("degree must be 1 or 2, got {}", self.degree));
        }
        if self.subdomains.is_empty() || self.subdomains.contains(&0) {
            return bad("subdomains must be positive".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return bad("epsilon values must be positive".into());
        }
        if !(self.alpha > 0.0) || !(self.tol > 0.0) || self.max_iters == 0 || self.workers == 0 {
            return bad("alpha, tol, max_iters and workers must be positive".into());
        }
        let counts = self.subdomains.len();
        if divisions > 1 && counts > 1 && divisions != counts {
            return bad(format!(
                "{divisions} meshes cannot be paired with {counts} subdomain counts"
            ));
        }
        match self.study {
            StudyMode::Single if divisions > 1 || counts > 1 => {
                bad("study = single takes one mesh and one subdomain count".into())
            }
            StudyMode::HSweep if divisions < 3 => {
                bad("an h-sweep needs at least three meshes".into())
            }
            StudyMode::EpsSweep if self.epsilons.len() < 2 => {
                bad("an eps-sweep needs at least two epsilon values".into())
            }
            StudyMode::NSweep if counts < 2 => {
                bad("an n-sweep needs at least two subdomain counts".into())
            }
            _ => Ok(()),
        }
    }

    /// Mesh and subdomain-count combinations in run order.
    pub fn cases(&self) -> Vec<Case> {
        let divisions: Vec<Option<usize>> = match &self.mesh {
            MeshSource::Generated { divisions, .. } => divisions.iter().map(|&d| Some(d)).collect(),
            MeshSource::Msh(_) => vec![None],
        };
        if divisions.len() > 1 && self.subdomains.len() > 1 {
            return divisions
                .into_iter()
                .zip(&self.subdomains)
                .map(|(divisions, &n)| Case { divisions, n })
                .collect();
        }
        divisions
            .iter()
            .flat_map(|&d| {
                self.subdomains
                    .iter()
                    .map(move |&n| Case { divisions: d, n })
            })
            .collect()
    }
}
