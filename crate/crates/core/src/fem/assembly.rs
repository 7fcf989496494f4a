//! Assembly of stiffness, mass, facet mass, normal-flux coupling and load
//! vectors. Element loops run in the order of the given element or facet
//! lists, so results are reproducible bit for bit.

use crate::mesh::{ElementGeometry, FacetRef, Mesh};

use super::basis::ReferenceElement;
use super::dofmap::{DofMap, MeshNodes, NodeIndex};
use super::quadrature::QuadratureRule;
use super::sparse::{CsrMatrix, TripletBuilder};

/// Quadrature degree used for load vectors: exact for quartic loads against
/// P2 test functions.
pub const LOAD_QUADRATURE_DEGREE: usize = 6;

/// Dense local stiffness matrix (row-major, `n_local^2`).
pub fn element_stiffness(reference: &ReferenceElement, geo: &ElementGeometry, out: &mut [f64]) {
    let n = reference.n_local();
    let d = geo.dim;
    let mut g = [[0.0; 4]; 4];
    for k in 0..=d {
        for l in 0..=d {
            g[k][l] = (0..d)
                .map(|r| geo.grad_bary[k][r] * geo.grad_bary[l][r])
                .sum::<f64>()
                * geo.volume;
        }
    }
    for ab in 0..n * n {
        let s = &reference.stiff[ab];
        let mut acc = 0.0;
        for k in 0..=d {
            for l in 0..=d {
                acc += g[k][l] * s[k][l];
            }
        }
        out[ab] = acc;
    }
}

pub fn element_mass(reference: &ReferenceElement, geo: &ElementGeometry, out: &mut [f64]) {
    for (o, m) in out.iter_mut().zip(&reference.mass) {
        *o = geo.volume * m;
    }
}

/// Local facet mass on the facet nodes (`nf^2`).
pub fn facet_mass(
    reference: &ReferenceElement,
    geo: &ElementGeometry,
    local: usize,
    out: &mut [f64],
) {
    let area = geo.facet_measure(local);
    for (o, m) in out.iter_mut().zip(&reference.facets[local].mass) {
        *o = area * m;
    }
}

/// Local normal-flux block `F[a * nf + q] = int (d phi_a / dn) phi_{facet node q}`.
pub fn facet_flux(
    reference: &ReferenceElement,
    geo: &ElementGeometry,
    local: usize,
    out: &mut [f64],
) {
    let area = geo.facet_measure(local);
    let normal = geo.outward_normal(local);
    let d = geo.dim;
    let mut dn = [0.0; 4];
    for (k, v) in dn.iter_mut().enumerate().take(d + 1) {
        *v = (0..d).map(|r| geo.grad_bary[k][r] * normal[r]).sum();
    }
    for (o, t) in out.iter_mut().zip(&reference.facets[local].flux) {
        *o = area * (0..=d).map(|k| dn[k] * t[k]).sum::<f64>();
    }
}

fn scatter(
    b: &mut TripletBuilder,
    row_nodes: &[usize],
    col_nodes: &[usize],
    rows: &impl NodeIndex,
    cols: &impl NodeIndex,
    local: &[f64],
) {
    let nc = col_nodes.len();
    for (a, &ra) in row_nodes.iter().enumerate() {
        let Some(r) = rows.index_of(ra) else { continue };
        for (q, &cq) in col_nodes.iter().enumerate() {
            if let Some(c) = cols.index_of(cq) {
                b.push(r, c, local[a * nc + q]);
            }
        }
    }
}

fn assemble_volume(
    mesh: &Mesh,
    nodes: &MeshNodes,
    dofs: &DofMap,
    kernel: fn(&ReferenceElement, &ElementGeometry, &mut [f64]),
) -> CsrMatrix {
    let reference = ReferenceElement::new(mesh.dim(), nodes.degree);
    let n = reference.n_local();
    let mut local = vec![0.0; n * n];
    let mut b = TripletBuilder::with_capacity(dofs.len(), dofs.len(), dofs.elements.len() * n * n);
    for &e in &dofs.elements {
        kernel(&reference, &mesh.geometry(e), &mut local);
        let en = nodes.element_nodes(e);
        scatter(&mut b, en, en, dofs, dofs, &local);
    }
    b.build()
}

/// Stiffness `int grad phi_j . grad phi_k` over the DOF map's elements.
pub fn assemble_stiffness(mesh: &Mesh, nodes: &MeshNodes, dofs: &DofMap) -> CsrMatrix {
    assemble_volume(mesh, nodes, dofs, element_stiffness)
}

pub fn assemble_mass(mesh: &Mesh, nodes: &MeshNodes, dofs: &DofMap) -> CsrMatrix {
    assemble_volume(mesh, nodes, dofs, element_mass)
}

/// Facet mass `int_F psi_j psi_k` (unscaled) summed over `facets`, with rows
/// and columns numbered by two possibly different index maps.
pub fn assemble_boundary_mass(
    mesh: &Mesh,
    nodes: &MeshNodes,
    rows: &impl NodeIndex,
    cols: &impl NodeIndex,
    facets: &[FacetRef],
) -> CsrMatrix {
    let reference = ReferenceElement::new(mesh.dim(), nodes.degree);
    let nf = reference.facets[0].nodes.len();
    let mut local = vec![0.0; nf * nf];
    let mut b = TripletBuilder::new(rows.size(), cols.size());
    for &f in facets {
        facet_mass(&reference, &mesh.geometry(f.element), f.local, &mut local);
        let fnodes = nodes.facet_nodes(f);
        scatter(&mut b, &fnodes, &fnodes, rows, cols, &local);
    }
    b.build()
}

/// Coupling `int_F (d phi_j / dn) psi_k` between volume DOFs `j` of the
/// owning element and facet-supported DOFs `k`; `n` is the outward normal of
/// the element named in each [`FacetRef`].
pub fn assemble_normal_flux(
    mesh: &Mesh,
    nodes: &MeshNodes,
    rows: &impl NodeIndex,
    cols: &impl NodeIndex,
    facets: &[FacetRef],
) -> CsrMatrix {
    let reference = ReferenceElement::new(mesh.dim(), nodes.degree);
    let n = reference.n_local();
    let nf = reference.facets[0].nodes.len();
    let mut local = vec![0.0; n * nf];
    let mut b = TripletBuilder::new(rows.size(), cols.size());
    for &f in facets {
        facet_flux(&reference, &mesh.geometry(f.element), f.local, &mut local);
        let fnodes = nodes.facet_nodes(f);
        scatter(
            &mut b,
            nodes.element_nodes(f.element),
            &fnodes,
            rows,
            cols,
            &local,
        );
    }
    b.build()
}

/// Load vector `int f phi_j` over the DOF map's elements.
pub fn assemble_load(
    mesh: &Mesh,
    nodes: &MeshNodes,
    dofs: &DofMap,
    f: &dyn Fn(&[f64; 3]) -> f64,
    degree: usize,
) -> Vec<f64> {
    let rule = QuadratureRule::simplex(mesh.dim(), degree);
    let basis = nodes.basis();
    let scale = 1.0 / rule.reference_measure();
    let mut phi = vec![0.0; basis.len()];
    let mut out = vec![0.0; dofs.len()];
    for &e in &dofs.elements {
        let geo = mesh.geometry(e);
        let en = nodes.element_nodes(e);
        let idx: Vec<Option<usize>> = en.iter().map(|&n| dofs.dof(n)).collect();
        if idx.iter().all(Option::is_none) {
            continue;
        }
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let fx = f(&geo.point(p));
            if fx == 0.0 {
                continue;
            }
            basis.eval(p, &mut phi);
            let wf = w * scale * geo.volume * fx;
            for (a, i) in idx.iter().enumerate() {
                if let Some(i) = *i {
                    out[i] += wf * phi[a];
                }
            }
        }
    }
    out
}
