//! Conforming Galerkin solve with homogeneous Dirichlet conditions, used as a
//! reference solution.

use crate::linalg::SparseCholesky;
use crate::mesh::Mesh;

use super::assembly::{
    assemble_load, assemble_stiffness, element_stiffness, LOAD_QUADRATURE_DEGREE,
};
use super::basis::ReferenceElement;
use super::dofmap::{DofMap, MeshNodes};
use super::FemError;

pub struct ConformingSolution {
    pub nodes: MeshNodes,
    pub dofs: DofMap,
    pub coeffs: Vec<f64>,
    /// `|grad u_h|^2` over the domain.
    pub energy: f64,
    /// The same per element, for energies of subregions.
    pub element_energy: Vec<f64>,
}

impl ConformingSolution {
    pub fn energy_on(&self, elements: &[usize]) -> f64 {
        elements.iter().map(|&e| self.element_energy[e]).sum()
    }
}

pub fn conforming_solve(
    mesh: &Mesh,
    p: usize,
    f: &dyn Fn(&[f64; 3]) -> f64,
) -> Result<ConformingSolution, FemError> {
    if p != 1 && p != 2 {
        return Err(FemError::Degree(p));
    }
    let nodes = MeshNodes::with_boundary(mesh, p);
    let all: Vec<usize> = (0..mesh.n_elements()).collect();
    let dofs = DofMap::new(&nodes, &all);
    let k = assemble_stiffness(mesh, &nodes, &dofs);
    let rhs = assemble_load(mesh, &nodes, &dofs, f, LOAD_QUADRATURE_DEGREE);
    let coeffs = if rhs.iter().all(|&v| v == 0.0) {
        vec![0.0; dofs.len()]
    } else {
        SparseCholesky::new(&k, "conforming stiffness")?.solve(&rhs)
    };

    let reference = ReferenceElement::new(mesh.dim(), p);
    let n = reference.n_local();
    let mut local = vec![0.0; n * n];
    let mut element_energy = vec![0.0; mesh.n_elements()];
    let mut u = vec![0.0; n];
    for (e, out) in element_energy.iter_mut().enumerate() {
        for (ua, d) in u.iter_mut().zip(dofs.element_dofs(&nodes, e)) {
            *ua = d.map_or(0.0, |d| coeffs[d]);
        }
        if u.iter().all(|&v| v == 0.0) {
            continue;
        }
        element_stiffness(&reference, &mesh.geometry(e), &mut local);
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += u[a] * local[a * n + b] * u[b];
            }
        }
        *out = acc;
    }
    let energy = element_energy.iter().sum();
    Ok(ConformingSolution {
        nodes,
        dofs,
        coeffs,
        energy,
        element_energy,
    })
}
