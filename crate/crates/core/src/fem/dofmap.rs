//! Global Lagrange node numbering and free-DOF maps over element subsets.

use std::collections::HashMap;

use crate::mesh::{FacetKey, FacetRef, Mesh};

use super::basis::{LagrangeBasis, LocalNode};

/// Maps node ids to matrix indices; implemented by volume DOF maps and by the
/// skeleton trace space.
pub trait NodeIndex {
    fn index_of(&self, node: usize) -> Option<usize>;
    fn size(&self) -> usize;
}

/// Lagrange nodes of a whole mesh: vertices first, then (for P2) edge
/// midpoints numbered by first appearance in element order.
#[derive(Clone, Debug)]
pub struct MeshNodes {
    pub degree: usize,
    n_local: usize,
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    element_nodes: Vec<usize>,
    constrained: Vec<bool>,
    basis: LagrangeBasis,
}

impl MeshNodes {
    /// Numbers all nodes and marks those on the given facets as constrained
    /// (homogeneous Dirichlet).
    pub fn new(mesh: &Mesh, degree: usize, constrained_facets: &[FacetKey]) -> Self {
        let basis = LagrangeBasis::new(mesh.dim(), degree);
        let n_local = basis.len();
        let n_vertices = mesh.n_vertices();
        let mut edge_id: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut element_nodes = Vec::with_capacity(mesh.n_elements() * n_local);
        for e in 0..mesh.n_elements() {
            let el = mesh.element(e);
            for node in &basis.nodes {
                let id = match *node {
                    LocalNode::Vertex(a) => el[a],
                    LocalNode::Edge(a, b) => {
                        let key = edge_key(el[a], el[b]);
                        *edge_id.entry(key).or_insert_with(|| {
                            edges.push(key);
                            n_vertices + edges.len() - 1
                        })
                    }
                };
                element_nodes.push(id);
            }
        }
        let mut constrained = vec![false; n_vertices + edges.len()];
        for key in constrained_facets {
            let vs: Vec<usize> = key.iter().copied().take(mesh.dim()).collect();
            for (k, &a) in vs.iter().enumerate() {
                constrained[a] = true;
                if degree == 2 {
                    for &b in &vs[k + 1..] {
                        if let Some(&id) = edge_id.get(&edge_key(a, b)) {
                            constrained[id] = true;
                        }
                    }
                }
            }
        }
        Self {
            degree,
            n_local,
            n_vertices,
            edges,
            element_nodes,
            constrained,
            basis,
        }
    }

    /// Nodes with the mesh boundary constrained.
    pub fn with_boundary(mesh: &Mesh, degree: usize) -> Self {
        let keys: Vec<FacetKey> = mesh
            .boundary_facets()
            .iter()
            .map(|&f| mesh.facet_key(f))
            .collect();
        Self::new(mesh, degree, &keys)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_vertices + self.edges.len()
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn element_nodes(&self, e: usize) -> &[usize] {
        &self.element_nodes[e * self.n_local..(e + 1) * self.n_local]
    }

    pub fn is_constrained(&self, node: usize) -> bool {
        self.constrained[node]
    }

    /// The one or two mesh vertices defining a node.
    pub fn node_vertices(&self, node: usize) -> [usize; 2] {
        if node < self.n_vertices {
            [node, node]
        } else {
            self.edges[node - self.n_vertices]
        }
    }

    pub fn coords(&self, mesh: &Mesh, node: usize) -> [f64; 3] {
        let [a, b] = self.node_vertices(node);
        let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
        [
            0.5 * (pa[0] + pb[0]),
            0.5 * (pa[1] + pb[1]),
            0.5 * (pa[2] + pb[2]),
        ]
    }

    /// Global nodes on a facet, in the element-local facet-node order.
    pub fn facet_nodes(&self, f: FacetRef) -> Vec<usize> {
        let el = self.element_nodes(f.element);
        self.basis
            .facet_nodes(f.local)
            .into_iter()
            .map(|a| el[a])
            .collect()
    }
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Free (unconstrained) DOFs of the nodes touched by an element subset,
/// numbered by increasing node id.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub degree: usize,
    pub elements: Vec<usize>,
    dof_of_node: Vec<u32>,
    node_of_dof: Vec<usize>,
    constrained: Vec<usize>,
}

const NONE: u32 = u32::MAX;

impl DofMap {
    pub fn new(nodes: &MeshNodes, elements: &[usize]) -> Self {
        let mut used = vec![false; nodes.n_nodes()];
        for &e in elements {
            for &n in nodes.element_nodes(e) {
                used[n] = true;
            }
        }
        let mut dof_of_node = vec![NONE; nodes.n_nodes()];
        let mut node_of_dof = Vec::new();
        let mut constrained = Vec::new();
        for (n, _) in used.iter().enumerate().filter(|(_, &u)| u) {
            if nodes.is_constrained(n) {
                constrained.push(n);
            } else {
                dof_of_node[n] = node_of_dof.len() as u32;
                node_of_dof.push(n);
            }
        }
        Self {
            degree: nodes.degree,
            elements: elements.to_vec(),
            dof_of_node,
            node_of_dof,
            constrained,
        }
    }

    /// Number of free DOFs.
    pub fn len(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_of_dof.is_empty()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        match self.dof_of_node.get(node) {
            Some(&d) if d != NONE => Some(d as usize),
            _ => None,
        }
    }

    pub fn node(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.node_of_dof
    }

    /// Constrained nodes touched by the element set.
    pub fn constrained_nodes(&self) -> &[usize] {
        &self.constrained
    }

    pub fn element_dofs<'a>(
        &'a self,
        nodes: &'a MeshNodes,
        e: usize,
    ) -> impl Iterator<Item = Option<usize>> + 'a {
        nodes.element_nodes(e).iter().map(move |&n| self.dof(n))
    }

    /// Sorted free DOFs lying on any of the given facets.
    pub fn boundary_dofs(&self, nodes: &MeshNodes, facets: &[FacetRef]) -> Vec<usize> {
        let mut out: Vec<usize> = facets
            .iter()
            .flat_map(|&f| nodes.facet_nodes(f))
            .filter_map(|n| self.dof(n))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl NodeIndex for DofMap {
    fn index_of(&self, node: usize) -> Option<usize> {
        self.dof(node)
    }

    fn size(&self) -> usize {
        self.len()
    }
}

/// Free DOF count of the conforming space on a generated cube or square:
/// interior lattice points of the `(p N + 1)^dim` node lattice.
pub fn lattice_counts(dim: usize, divisions: usize, degree: usize) -> (usize, usize) {
    let side = degree * divisions + 1;
    (side.pow(dim as u32), (side - 2).pow(dim as u32))
}
