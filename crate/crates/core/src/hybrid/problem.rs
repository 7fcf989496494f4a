use std::collections::{HashMap, HashSet};

use crate::fem::{DofMap, Load, MeshNodes, NodeIndex};
use crate::mesh::{FacetKey, FacetRef, Mesh, Partition, Skeleton};

use super::{HybridError, LocalTrace, TraceSpace};

/// Interface facet of a subdomain with the global trace index of each of its
/// nodes (element-local facet-node order; `None` for constrained nodes).
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceFacet {
    pub facet: FacetRef,
    pub trace: Vec<Option<usize>>,
}

/// Everything a worker needs to build the local blocks and the reduced basis
/// of one subdomain, expressed on its extended submesh.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainProblem {
    pub subdomain: usize,
    pub degree: usize,
    pub alpha: f64,
    /// Subdomain mesh size `h_i`.
    pub h: f64,
    pub load: Load,
    /// Extended submesh with local vertex ids; the first `n_core` elements
    /// form the subdomain itself.
    pub mesh: Mesh,
    pub n_core: usize,
    pub global_elements: Vec<usize>,
    pub global_vertices: Vec<usize>,
    /// Facets of the submesh on the outer boundary (local vertex ids).
    pub outer_facets: Vec<FacetKey>,
    pub interface: Vec<InterfaceFacet>,
}

/// Node numbering and DOF maps of a subdomain problem.
pub struct LocalSpaces {
    pub nodes: MeshNodes,
    pub core: DofMap,
    pub ext: DofMap,
    pub trace: LocalTrace,
}

impl SubdomainProblem {
    /// Cuts subdomain `i` (with its extension) out of the global mesh.
    #[allow(clippy::too_many_arguments)]
    pub fn extract(
        mesh: &Mesh,
        nodes: &MeshNodes,
        partition: &Partition,
        skeleton: &Skeleton,
        trace: &TraceSpace,
        i: usize,
        alpha: f64,
        load: Load,
    ) -> Result<Self, HybridError> {
        if alpha <= 0.0 || alpha.is_nan() {
            return Err(HybridError::Alpha(alpha));
        }
        let core = &partition.core_elems[i];
        if core.is_empty() {
            return Err(HybridError::EmptySubdomain(i));
        }
        let ext = &partition.ext_elems[i];
        debug_assert_eq!(&ext[..core.len()], &core[..]);

        let mut global_vertices: Vec<usize> = ext
            .iter()
            .flat_map(|&e| mesh.element(e).iter().copied())
            .collect();
        global_vertices.sort_unstable();
        global_vertices.dedup();
        let local_of: HashMap<usize, usize> = global_vertices
            .iter()
            .enumerate()
            .map(|(l, &g)| (g, l))
            .collect();
        let vertices = global_vertices.iter().map(|&g| *mesh.vertex(g)).collect();
        let elements = ext
            .iter()
            .map(|&e| {
                let mut el = [usize::MAX; 4];
                for (k, v) in mesh.element(e).iter().enumerate() {
                    el[k] = local_of[v];
                }
                el
            })
            .collect();
        let local_mesh = Mesh::new(mesh.dim(), vertices, elements)?;

        let outer: HashSet<FacetKey> = mesh
            .boundary_facets()
            .iter()
            .map(|&f| mesh.facet_key(f))
            .collect();
        let mut outer_facets: Vec<FacetKey> = local_mesh
            .boundary_facets()
            .iter()
            .filter_map(|&f| {
                let global: Vec<usize> = local_mesh
                    .facet_vertices(f)
                    .iter()
                    .map(|&v| global_vertices[v])
                    .collect();
                outer
                    .contains(&crate::mesh::facet_key(&global))
                    .then(|| local_mesh.facet_key(f))
            })
            .collect();
        outer_facets.sort_unstable();

        let elem_local: HashMap<usize, usize> =
            core.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let mut interface: Vec<InterfaceFacet> = skeleton
            .subdomain_facets(i)
            .filter(|(f, _)| !f.on_outer_boundary)
            .map(|(_, side)| InterfaceFacet {
                facet: FacetRef {
                    element: elem_local[&side.facet.element],
                    local: side.facet.local,
                },
                trace: nodes
                    .facet_nodes(side.facet)
                    .into_iter()
                    .map(|n| trace.index_of(n))
                    .collect(),
            })
            .collect();
        interface.sort_by_key(|f| f.facet);
        if interface.is_empty() && partition.n > 1 {
            return Err(HybridError::NoInterface(i));
        }

        Ok(Self {
            subdomain: i,
            degree: nodes.degree,
            alpha,
            h: partition.h_sub[i],
            load,
            mesh: local_mesh,
            n_core: core.len(),
            global_elements: ext.clone(),
            global_vertices,
            outer_facets,
            interface,
        })
    }

    pub fn core_elements(&self) -> Vec<usize> {
        (0..self.n_core).collect()
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (self.alpha * self.h)
    }

    pub fn interface_facets(&self) -> Vec<FacetRef> {
        self.interface.iter().map(|f| f.facet).collect()
    }

    pub fn spaces(&self) -> LocalSpaces {
        let nodes = MeshNodes::new(&self.mesh, self.degree, &self.outer_facets);
        let core = DofMap::new(&nodes, &self.core_elements());
        let all: Vec<usize> = (0..self.mesh.n_elements()).collect();
        let ext = DofMap::new(&nodes, &all);
        let trace = LocalTrace::from_pairs(self.interface.iter().flat_map(|f| {
            nodes
                .facet_nodes(f.facet)
                .into_iter()
                .zip(f.trace.iter().copied())
                .filter_map(|(n, t)| t.map(|t| (n, t)))
                .collect::<Vec<_>>()
        }));
        LocalSpaces {
            nodes,
            core,
            ext,
            trace,
        }
    }

    pub fn eval_load(&self, x: &[f64; 3]) -> f64 {
        self.load.eval(self.mesh.dim(), x)
    }
}
