use super::{Mesh, MeshError};

/// Structured mesh of the unit square (two triangles per cell) or unit cube
/// (six tetrahedra per cell, all sharing the cell's main diagonal).
///
/// The maximum element diameter is `sqrt(dim) / divisions`.
pub fn generate_structured_mesh(dim: usize, divisions: usize) -> Result<Mesh, MeshError> {
    assert!(divisions >= 1, "divisions must be positive");
    let n = divisions;
    let h = 1.0 / n as f64;
    match dim {
        2 => {
            let idx = |i: usize, j: usize| j * (n + 1) + i;
            let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([i as f64 * h, j as f64 * h, 0.0]);
                }
            }
            let mut elements = Vec::with_capacity(2 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let (v00, v10, v01, v11) =
                        (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                    elements.push([v00, v10, v11, usize::MAX]);
                    elements.push([v00, v11, v01, usize::MAX]);
                }
            }
            Mesh::new(2, vertices, elements)
        }
        3 => {
            let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
            let mut vertices = Vec::with_capacity((n + 1).pow(3));
            for k in 0..=n {
                for j in 0..=n {
                    for i in 0..=n {
                        vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                    }
                }
            }
            // monotone lattice paths from (0,0,0) to (1,1,1), one per axis permutation
            const PATHS: [[usize; 3]; 6] = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            let mut elements = Vec::with_capacity(6 * n * n * n);
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        for path in PATHS {
                            let mut offset = [0usize; 3];
                            let mut tet = [idx(i, j, k); 4];
                            for (step, &axis) in path.iter().enumerate() {
                                offset[axis] = 1;
                                tet[step + 1] = idx(i + offset[0], j + offset[1], k + offset[2]);
                            }
                            elements.push(tet);
                        }
                    }
                }
            }
            Mesh::new(3, vertices, elements)
        }
        d => Err(MeshError::Dimension(d)),
    }
}
