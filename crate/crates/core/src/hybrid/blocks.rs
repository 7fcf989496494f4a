use crate::fem::{
    assemble_boundary_mass, assemble_load, assemble_normal_flux, assemble_stiffness, CsrMatrix,
    Load, MeshNodes, TripletBuilder, LOAD_QUADRATURE_DEGREE,
};
use crate::mesh::{Mesh, Partition, Skeleton};

use super::{HybridError, LocalSpaces, SubdomainProblem, TraceSpace};

/// Local Nitsche blocks of one subdomain.
#[derive(Clone, Debug)]
pub struct LocalBlocks {
    pub subdomain: usize,
    /// Penalty `1 / (alpha h_i)`.
    pub gamma: f64,
    pub a: CsrMatrix,
    /// Volume by local trace DOFs.
    pub b: CsrMatrix,
    pub f: Vec<f64>,
    pub stiffness: CsrMatrix,
    /// Unscaled volume facet mass on the interface.
    pub boundary_mass: CsrMatrix,
    /// Global trace index of each column of `b`.
    pub trace_global: Vec<usize>,
    /// This subdomain's part of `C`, in local trace numbering.
    pub c_local: CsrMatrix,
}

impl LocalBlocks {
    /// Assembles `A_i = K - D - D^T + gamma M`, `B_i = D_tr - gamma M_tr`,
    /// `f_i` and `gamma M_trace`.
    pub fn assemble(problem: &SubdomainProblem, spaces: &LocalSpaces) -> Self {
        let mesh = &problem.mesh;
        let LocalSpaces {
            nodes, core, trace, ..
        } = spaces;
        let facets = problem.interface_facets();
        let gamma = problem.gamma();
        let stiffness = assemble_stiffness(mesh, nodes, core);
        let boundary_mass = assemble_boundary_mass(mesh, nodes, core, core, &facets);
        let d = assemble_normal_flux(mesh, nodes, core, core, &facets);
        let a = stiffness
            .add_scaled(&d, -1.0)
            .add_scaled(&d.transpose(), -1.0)
            .add_scaled(&boundary_mass, gamma);
        let d_tr = assemble_normal_flux(mesh, nodes, core, trace, &facets);
        let m_tr = assemble_boundary_mass(mesh, nodes, core, trace, &facets);
        let b = d_tr.add_scaled(&m_tr, -gamma);
        let c_local = assemble_boundary_mass(mesh, nodes, trace, trace, &facets).scaled(gamma);
        let f = assemble_load(
            mesh,
            nodes,
            core,
            &|x| problem.eval_load(x),
            LOAD_QUADRATURE_DEGREE,
        );
        Self {
            subdomain: problem.subdomain,
            gamma,
            a,
            b,
            f,
            stiffness,
            boundary_mass,
            trace_global: spaces.trace.global.clone(),
            c_local,
        }
    }
}

/// Extracts subdomain `i` and assembles its blocks.
#[allow(clippy::too_many_arguments)]
pub fn assemble_local_blocks(
    mesh: &Mesh,
    nodes: &MeshNodes,
    partition: &Partition,
    skeleton: &Skeleton,
    trace: &TraceSpace,
    i: usize,
    alpha: f64,
    load: Load,
) -> Result<LocalBlocks, HybridError> {
    let problem =
        SubdomainProblem::extract(mesh, nodes, partition, skeleton, trace, i, alpha, load)?;
    Ok(LocalBlocks::assemble(&problem, &problem.spaces()))
}

/// Sums local `C` contributions given as (local-to-global map, block) pairs.
pub fn assemble_c<'a>(
    parts: impl IntoIterator<Item = (&'a [usize], &'a CsrMatrix)>,
    k: usize,
) -> CsrMatrix {
    let mut b = TripletBuilder::new(k, k);
    for (global, c) in parts {
        for r in 0..c.nrows {
            for (col, v) in c.row(r) {
                b.push(global[r], global[col], v);
            }
        }
    }
    b.build()
}

/// `C` from a list of local blocks.
pub fn assemble_c_from_blocks(blocks: &[LocalBlocks], trace: &TraceSpace) -> CsrMatrix {
    assemble_c(
        blocks.iter().map(|b| (&b.trace_global[..], &b.c_local)),
        trace.len(),
    )
}
