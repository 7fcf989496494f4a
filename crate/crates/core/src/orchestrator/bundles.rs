//! Task, result and solution files.

use std::path::Path;

use crate::fem::Load;
use crate::hybrid::{InterfaceFacet, SubdomainProblem};
use crate::mesh::{FacetRef, Mesh};
use crate::mor::ReducedBundle;

use super::format::{read_container, section, write_container, Decoder, Encoder, FormatError};
use super::OrchestratorError;

pub const TASK_MAGIC: &[u8; 8] = b"NDDTASK\0";
pub const RESULT_MAGIC: &[u8; 8] = b"NDDRSLT\0";
pub const SOLUTION_MAGIC: &[u8; 8] = b"NDDSOLN\0";

const META: u32 = 1;
const VERTICES: u32 = 2;
const ELEMENTS: u32 = 3;
const GLOBAL_MAPS: u32 = 4;
const OUTER: u32 = 5;
const INTERFACE: u32 = 6;
const EPSILONS: u32 = 7;
const SPECTRUM: u32 = 8;
const C_LOCAL: u32 = 9;
const BUNDLES: u32 = 10;
const COORDS: u32 = 11;
const SOLUTIONS: u32 = 12;

const NONE: u64 = u64::MAX;

/// Everything one worker needs: the extracted subdomain problem and the
/// tolerances to reduce for.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBundle {
    pub problem: SubdomainProblem,
    pub epsilons: Vec<f64>,
    /// Keep the reduced basis so core solutions can be reconstructed.
    pub keep_q: bool,
}

/// Worker output: one reduced bundle per tolerance plus the coordinates of
/// the core DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub subdomain: usize,
    pub bundles: Vec<ReducedBundle>,
    /// Coordinates of the core DOFs in the order of `Q`'s rows.
    pub core_coords: Vec<[f64; 3]>,
}

/// Reconstructed core solution of one subdomain for each tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainSolution {
    pub subdomain: usize,
    pub core_coords: Vec<[f64; 3]>,
    /// `(epsilon, beta_i)` pairs.
    pub solutions: Vec<(f64, Vec<f64>)>,
}

fn load_code(code: u8) -> Result<Load, FormatError> {
    Load::from_code(code).ok_or_else(|| FormatError::Invalid(format!("unknown load code {code}")))
}

fn coords(e: &mut Encoder, pts: &[[f64; 3]]) {
    let flat: Vec<f64> = pts.iter().flat_map(|x| x.iter().copied()).collect();
    e.f64s(&flat);
}

fn read_coords(d: &mut Decoder) -> Result<Vec<[f64; 3]>, FormatError> {
    let flat = d.f64s()?;
    if flat.len() % 3 != 0 {
        return Err(FormatError::Invalid("coordinate array length".into()));
    }
    Ok(flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

impl TaskBundle {
    pub fn encode(&self) -> Vec<u8> {
        let p = &self.problem;
        let mesh = &p.mesh;
        let meta = Encoder::new()
            .usize(p.subdomain)
            .usize(p.degree)
            .f64(p.alpha)
            .f64(p.h)
            .u8(p.load.code())
            .usize(p.n_core)
            .usize(mesh.dim())
            .u8(self.keep_q as u8)
            .finish();
        let mut v = Encoder::new();
        coords(&mut v, mesh.vertices());
        let vertices = v.finish();
        let mut el = Encoder::new();
        el.usize(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            for &v in mesh.element(e) {
                el.usize(v);
            }
        }
        let maps = Encoder::new()
            .usizes(&p.global_elements)
            .usizes(&p.global_vertices)
            .finish();
        let mut outer = Encoder::new();
        outer.usize(p.outer_facets.len());
        for key in &p.outer_facets {
            for &v in key {
                outer.u64(if v == usize::MAX { NONE } else { v as u64 });
            }
        }
        let mut iface = Encoder::new();
        iface.usize(p.interface.len());
        for f in &p.interface {
            iface
                .usize(f.facet.element)
                .usize(f.facet.local)
                .usize(f.trace.len());
            for t in &f.trace {
                iface.u64(t.map_or(NONE, |t| t as u64));
            }
        }
        let eps = Encoder::new().f64s(&self.epsilons).finish();
        write_container(
            TASK_MAGIC,
            &[
                (META, meta),
                (VERTICES, vertices),
                (ELEMENTS, el.finish()),
                (GLOBAL_MAPS, maps),
                (OUTER, outer.finish()),
                (INTERFACE, iface.finish()),
                (EPSILONS, eps),
            ],
        )
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, OrchestratorError> {
        let s = read_container(TASK_MAGIC, bytes)?;
        let mut meta = section(&s, META)?;
        let subdomain = meta.usize()?;
        let degree = meta.usize()?;
        let alpha = meta.f64()?;
        let h = meta.f64()?;
        let load = load_code(meta.u8()?)?;
        let n_core = meta.usize()?;
        let dim = meta.usize()?;
        let keep_q = meta.u8()? != 0;

        let vertices = read_coords(&mut section(&s, VERTICES)?)?;
        let mut el = section(&s, ELEMENTS)?;
        let n_el = el.usize()?;
        let mut elements = Vec::with_capacity(n_el.min(1 << 24));
        for _ in 0..n_el {
            let mut e = [usize::MAX; 4];
            for slot in e.iter_mut().take(dim + 1) {
                *slot = el.usize()?;
            }
            elements.push(e);
        }
        let mesh = Mesh::new(dim, vertices, elements)?;
        let mut maps = section(&s, GLOBAL_MAPS)?;
        let global_elements = maps.usizes()?;
        let global_vertices = maps.usizes()?;

        let mut outer = section(&s, OUTER)?;
        let n_outer = outer.usize()?;
        let mut outer_facets = Vec::with_capacity(n_outer.min(1 << 24));
        for _ in 0..n_outer {
            let mut key = [usize::MAX; 3];
            for slot in key.iter_mut() {
                let v = outer.u64()?;
                if v != NONE {
                    *slot = v as usize;
                }
            }
            outer_facets.push(key);
        }
        let mut iface = section(&s, INTERFACE)?;
        let n_iface = iface.usize()?;
        let mut interface = Vec::with_capacity(n_iface.min(1 << 24));
        for _ in 0..n_iface {
            let element = iface.usize()?;
            let local = iface.usize()?;
            let n = iface.usize()?;
            let mut trace = Vec::with_capacity(n.min(64));
            for _ in 0..n {
                let t = iface.u64()?;
                trace.push((t != NONE).then_some(t as usize));
            }
            if element >= n_core || local > dim {
                return Err(FormatError::Invalid("interface facet outside the core".into()).into());
            }
            interface.push(InterfaceFacet {
                facet: FacetRef { element, local },
                trace,
            });
        }
        let epsilons = section(&s, EPSILONS)?.f64s()?;
        if n_core > mesh.n_elements() || global_elements.len() != mesh.n_elements() {
            return Err(FormatError::Invalid("element counts disagree".into()).into());
        }
        Ok(Self {
            problem: SubdomainProblem {
                subdomain,
                degree,
                alpha,
                h,
                load,
                mesh,
                n_core,
                global_elements,
                global_vertices,
                outer_facets,
                interface,
            },
            epsilons,
            keep_q,
        })
    }
}

impl ResultBundle {
    pub fn encode(&self) -> Vec<u8> {
        let first = self.bundles.first();
        let mut meta = Encoder::new();
        meta.usize(self.subdomain).usize(self.bundles.len());
        if let Some(b) = first {
            meta.usize(b.n_core)
                .usize(b.n_ext)
                .usize(b.n_boundary)
                .usizes(&b.trace_global);
        }
        let spectrum = Encoder::new()
            .f64s(first.map_or(&[][..], |b| &b.sigma))
            .finish();
        let c_local = first
            .map(|b| Encoder::new().csr(&b.c_local).finish())
            .unwrap_or_default();
        let mut all = Encoder::new();
        for b in &self.bundles {
            all.f64(b.epsilon)
                .usize(b.k)
                .u8(b.with_particular as u8)
                .f64s(&b.lambda)
                .mat(&b.b)
                .f64s(&b.f)
                .mat(&b.stiffness)
                .f64s(&b.precond);
            match &b.q {
                Some(q) => {
                    all.u8(1).mat(q);
                }
                None => {
                    all.u8(0);
                }
            }
        }
        let mut c = Encoder::new();
        coords(&mut c, &self.core_coords);
        write_container(
            RESULT_MAGIC,
            &[
                (META, meta.finish()),
                (SPECTRUM, spectrum),
                (C_LOCAL, c_local),
                (BUNDLES, all.finish()),
                (COORDS, c.finish()),
            ],
        )
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, OrchestratorError> {
        let s = read_container(RESULT_MAGIC, bytes)?;
        let mut meta = section(&s, META)?;
        let subdomain = meta.usize()?;
        let count = meta.usize()?;
        let mut bundles = Vec::with_capacity(count.min(1024));
        if count > 0 {
            let n_core = meta.usize()?;
            let n_ext = meta.usize()?;
            let n_boundary = meta.usize()?;
            let trace_global = meta.usizes()?;
            let sigma = section(&s, SPECTRUM)?.f64s()?;
            let c_local = section(&s, C_LOCAL)?.csr()?;
            let mut all = section(&s, BUNDLES)?;
            for _ in 0..count {
                let epsilon = all.f64()?;
                let k = all.usize()?;
                let with_particular = all.u8()? != 0;
                let lambda = all.f64s()?;
                let b = all.mat()?;
                let f = all.f64s()?;
                let stiffness = all.mat()?;
                let precond = all.f64s()?;
                let q = if all.u8()? != 0 {
                    Some(all.mat()?)
                } else {
                    None
                };
                let kt = lambda.len();
                let consistent = b.nrows() == kt
                    && b.ncols() == trace_global.len()
                    && f.len() == kt
                    && stiffness.nrows() == kt
                    && stiffness.ncols() == kt
                    && precond.len() == trace_global.len()
                    && q.as_ref()
                        .is_none_or(|q| q.nrows() == n_core && q.ncols() == kt);
                if !consistent {
                    return Err(FormatError::Invalid(format!(
                        "bundle of subdomain {subdomain} has inconsistent shapes"
                    ))
                    .into());
                }
                bundles.push(ReducedBundle {
                    subdomain,
                    epsilon,
                    k,
                    with_particular,
                    n_core,
                    n_ext,
                    n_boundary,
                    lambda,
                    b,
                    trace_global: trace_global.clone(),
                    f,
                    stiffness,
                    precond,
                    sigma: sigma.clone(),
                    q,
                    c_local: c_local.clone(),
                });
            }
        }
        let core_coords = read_coords(&mut section(&s, COORDS)?)?;
        Ok(Self {
            subdomain,
            bundles,
            core_coords,
        })
    }
}

impl SubdomainSolution {
    pub fn encode(&self) -> Vec<u8> {
        let meta = Encoder::new()
            .usize(self.subdomain)
            .usize(self.solutions.len())
            .finish();
        let mut c = Encoder::new();
        coords(&mut c, &self.core_coords);
        let mut sol = Encoder::new();
        for (eps, beta) in &self.solutions {
            sol.f64(*eps).f64s(beta);
        }
        write_container(
            SOLUTION_MAGIC,
            &[
                (META, meta),
                (COORDS, c.finish()),
                (SOLUTIONS, sol.finish()),
            ],
        )
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, OrchestratorError> {
        let s = read_container(SOLUTION_MAGIC, bytes)?;
        let mut meta = section(&s, META)?;
        let subdomain = meta.usize()?;
        let count = meta.usize()?;
        let core_coords = read_coords(&mut section(&s, COORDS)?)?;
        let mut sol = section(&s, SOLUTIONS)?;
        let solutions = (0..count)
            .map(|_| Ok((sol.f64()?, sol.f64s()?)))
            .collect::<Result<_, FormatError>>()?;
        Ok(Self {
            subdomain,
            core_coords,
            solutions,
        })
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, OrchestratorError> {
    std::fs::read(path).map_err(|source| OrchestratorError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a temporary file and a rename so readers never see a
/// partially written file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), OrchestratorError> {
    let tmp = path.with_extension("tmp");
    let io = |source| OrchestratorError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
