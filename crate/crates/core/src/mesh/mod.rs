//! Simplicial meshes (triangles in 2D, tetrahedra in 3D), their partition into
//! subdomains, overlapping extensions and the interface skeleton.

mod generate;
mod msh;
mod partition;
mod skeleton;

use std::collections::HashMap;

pub use generate::generate_structured_mesh;
pub use msh::{parse_msh, read_msh, write_msh};
pub use partition::{
    extend_subdomains, partition_elements, read_partition_file, write_partition_file, Partition,
    PartitionMethod,
};
pub use skeleton::{extract_skeleton, FacetSide, Skeleton, SkeletonFacet};

/// Errors raised while building, reading or partitioning meshes.
#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("unsupported spatial dimension {0}")]
    Dimension(usize),
    #[error("element {element} references vertex {vertex} but the mesh has {n_vertices} vertices")]
    VertexIndex {
        element: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("element {0} is degenerate (zero volume)")]
    Degenerate(usize),
    #[error("facet {facet:?} is shared by more than two elements")]
    NonManifold { facet: FacetKey },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported element: {0}")]
    UnsupportedElement(String),
    #[error("partition: {0}")]
    Partition(String),
    #[error("non-conforming interface at facet {0:?}")]
    NonConforming(FacetKey),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sorted vertex tuple identifying a facet. Unused trailing slots (2D meshes)
/// hold `usize::MAX`.
pub type FacetKey = [usize; 3];

/// A facet addressed through one of its elements: the facet opposite local
/// vertex `local`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FacetRef {
    pub element: usize,
    pub local: usize,
}

/// Sorts the first `n` entries of a facet key and pads the rest.
pub fn facet_key(vertices: &[usize]) -> FacetKey {
    let mut key = [usize::MAX; 3];
    key[..vertices.len()].copy_from_slice(vertices);
    key[..vertices.len()].sort_unstable();
    key
}

/// Affine geometry of one simplex: barycentric gradients, signed volume and
/// diameter.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub dim: usize,
    /// Gradient of each barycentric coordinate; entries beyond `dim` are zero.
    pub grad_bary: [[f64; 3]; 4],
    pub volume: f64,
    pub diameter: f64,
    pub vertices: [[f64; 3]; 4],
}

impl ElementGeometry {
    pub fn new(dim: usize, pts: &[[f64; 3]]) -> Option<Self> {
        let mut vertices = [[0.0; 3]; 4];
        vertices[..=dim].copy_from_slice(&pts[..=dim]);
        let mut jac = [[0.0; 3]; 3];
        for c in 0..dim {
            for r in 0..dim {
                jac[r][c] = pts[c + 1][r] - pts[0][r];
            }
        }
        let (det, inv) = match dim {
            2 => {
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                if det == 0.0 {
                    return None;
                }
                let inv = [
                    [jac[1][1] / det, -jac[0][1] / det, 0.0],
                    [-jac[1][0] / det, jac[0][0] / det, 0.0],
                    [0.0; 3],
                ];
                (det, inv)
            }
            3 => {
                let m = &jac;
                let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
                let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
                let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
                let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
                if det == 0.0 {
                    return None;
                }
                let inv = [
                    [
                        c00 / det,
                        (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
                        (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
                    ],
                    [
                        c01 / det,
                        (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
                        (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
                    ],
                    [
                        c02 / det,
                        (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
                        (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
                    ],
                ];
                (det, inv)
            }
            _ => return None,
        };
        // rows of J^{-1} are the gradients of lambda_1..lambda_d
        let mut grad_bary = [[0.0; 3]; 4];
        for k in 0..dim {
            grad_bary[k + 1][..dim].copy_from_slice(&inv[k][..dim]);
        }
        for r in 0..dim {
            grad_bary[0][r] = -(1..=dim).map(|k| grad_bary[k][r]).sum::<f64>();
        }
        let factorial = if dim == 2 { 2.0 } else { 6.0 };
        let mut diameter: f64 = 0.0;
        for a in 0..=dim {
            for b in a + 1..=dim {
                diameter = diameter.max(dist(&pts[a], &pts[b]));
            }
        }
        Some(Self {
            dim,
            grad_bary,
            volume: det / factorial,
            diameter,
            vertices,
        })
    }

    /// Measure of the facet opposite local vertex `local`.
    pub fn facet_measure(&self, local: usize) -> f64 {
        self.dim as f64 * self.volume.abs() * norm(&self.grad_bary[local])
    }

    /// Outward unit normal of the facet opposite local vertex `local`.
    pub fn outward_normal(&self, local: usize) -> [f64; 3] {
        let g = &self.grad_bary[local];
        let n = norm(g);
        [-g[0] / n, -g[1] / n, -g[2] / n]
    }

    /// Physical point from barycentric coordinates.
    pub fn point(&self, bary: &[f64]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (k, l) in bary.iter().enumerate().take(self.dim + 1) {
            for r in 0..3 {
                x[r] += l * self.vertices[k][r];
            }
        }
        x
    }
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// The one or two elements adjacent to a facet.
#[derive(Clone, Copy, Debug)]
pub struct FacetIncidence {
    pub first: FacetRef,
    pub second: Option<FacetRef>,
}

/// A conforming simplicial mesh.
///
/// Coordinates are stored padded to three components; elements are positively
/// oriented (vertex 0 to 2 or 3 form a right-handed frame).
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<[f64; 3]>,
    elements: Vec<[usize; 4]>,
    boundary_facets: Vec<FacetRef>,
}

impl Mesh {
    /// Builds a mesh, flipping negatively oriented elements and collecting the
    /// facets that belong to exactly one element as the boundary.
    pub fn new(
        dim: usize,
        vertices: Vec<[f64; 3]>,
        mut elements: Vec<[usize; 4]>,
    ) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::Dimension(dim));
        }
        for (e, el) in elements.iter_mut().enumerate() {
            for &v in &el[..=dim] {
                if v >= vertices.len() {
                    return Err(MeshError::VertexIndex {
                        element: e,
                        vertex: v,
                        n_vertices: vertices.len(),
                    });
                }
            }
            if dim == 2 {
                el[3] = usize::MAX;
            }
            let pts: Vec<[f64; 3]> = el[..=dim].iter().map(|&v| vertices[v]).collect();
            let geo = ElementGeometry::new(dim, &pts).ok_or(MeshError::Degenerate(e))?;
            if geo.volume.abs() <= 1e-14 * geo.diameter.powi(dim as i32) {
                return Err(MeshError::Degenerate(e));
            }
            if geo.volume < 0.0 {
                el.swap(dim - 1, dim);
            }
        }
        let mut mesh = Self {
            dim,
            vertices,
            elements,
            boundary_facets: Vec::new(),
        };
        let incidence = mesh.facet_incidence()?;
        let mut boundary: Vec<FacetRef> = incidence
            .values()
            .filter(|inc| inc.second.is_none())
            .map(|inc| inc.first)
            .collect();
        boundary.sort_unstable();
        mesh.boundary_facets = boundary;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &[f64; 3] {
        &self.vertices[v]
    }

    /// Vertex indices of element `e` (`dim + 1` entries).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..=self.dim]
    }

    pub fn boundary_facets(&self) -> &[FacetRef] {
        &self.boundary_facets
    }

    pub fn geometry(&self, e: usize) -> ElementGeometry {
        let pts: Vec<[f64; 3]> = self.element(e).iter().map(|&v| self.vertices[v]).collect();
        ElementGeometry::new(self.dim, &pts).expect("mesh elements are validated on construction")
    }

    pub fn centroid(&self, e: usize) -> [f64; 3] {
        let mut c = [0.0; 3];
        let el = self.element(e);
        for &v in el {
            for r in 0..3 {
                c[r] += self.vertices[v][r];
            }
        }
        c.map(|x| x / el.len() as f64)
    }

    pub fn diameter(&self, e: usize) -> f64 {
        let el = self.element(e);
        let mut d: f64 = 0.0;
        for a in 0..el.len() {
            for b in a + 1..el.len() {
                d = d.max(dist(&self.vertices[el[a]], &self.vertices[el[b]]));
            }
        }
        d
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| self.diameter(e))
            .fold(0.0, f64::max)
    }

    /// Vertices of the facet opposite local vertex `local` of element `e`, in
    /// element order.
    pub fn facet_vertices(&self, f: FacetRef) -> Vec<usize> {
        self.element(f.element)
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != f.local)
            .map(|(_, &v)| v)
            .collect()
    }

    pub fn facet_key(&self, f: FacetRef) -> FacetKey {
        facet_key(&self.facet_vertices(f))
    }

    /// Adjacency of every facet to its one or two elements.
    pub fn facet_incidence(&self) -> Result<HashMap<FacetKey, FacetIncidence>, MeshError> {
        let mut map: HashMap<FacetKey, FacetIncidence> =
            HashMap::with_capacity(self.n_elements() * (self.dim + 1));
        for e in 0..self.n_elements() {
            for local in 0..=self.dim {
                let f = FacetRef { element: e, local };
                let key = self.facet_key(f);
                match map.get_mut(&key) {
                    None => {
                        map.insert(
                            key,
                            FacetIncidence {
                                first: f,
                                second: None,
                            },
                        );
                    }
                    Some(inc) if inc.second.is_none() => inc.second = Some(f),
                    Some(_) => return Err(MeshError::NonManifold { facet: key }),
                }
            }
        }
        Ok(map)
    }

    /// Total measure of the domain.
    pub fn measure(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| self.geometry(e).volume)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tet_has_four_boundary_facets() {
        let mesh = Mesh::new(
            3,
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        assert_eq!(mesh.boundary_facets().len(), 4);
        assert!((mesh.measure() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn negative_orientation_is_flipped() {
        let mesh = Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
            vec![[0, 1, 2, 0]],
        )
        .unwrap();
        assert!(mesh.geometry(0).volume > 0.0);
    }

    #[test]
    fn degenerate_element_is_rejected() {
        let err = Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2, 0]],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::Degenerate(0)));
    }

    #[test]
    fn facet_normal_and_measure() {
        let mesh = Mesh::new(
            3,
            vec![
                [0.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [0.0, 2.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        let g = mesh.geometry(0);
        // facet opposite vertex 3 is the z = 0 face with area 2
        assert!((g.facet_measure(3) - 2.0).abs() < 1e-14);
        let n = g.outward_normal(3);
        assert!((n[2] + 1.0).abs() < 1e-14);
    }
}
