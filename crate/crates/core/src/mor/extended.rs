use faer::Mat;

use crate::fem::{
    assemble_load, assemble_mass, assemble_stiffness, CsrMatrix, LOAD_QUADRATURE_DEGREE,
};
use crate::hybrid::{LocalBlocks, LocalSpaces, SubdomainProblem};
use crate::linalg::SparseCholesky;

use super::MorError;

/// Right-hand sides solved per block in multi-column solves.
const CHUNK: usize = 192;

/// Problem on the extended subdomain with the outer boundary eliminated.
pub struct ExtendedSystem {
    pub subdomain: usize,
    pub stiffness: CsrMatrix,
    /// H1 Gram matrix: stiffness plus mass.
    pub gram: CsrMatrix,
    /// Extended DOFs on the boundary of the extended subdomain.
    pub boundary: Vec<usize>,
    pub interior: Vec<usize>,
    /// Extended DOF of each core DOF.
    pub core_to_ext: Vec<usize>,
    pub load: Vec<f64>,
    k_ii: SparseCholesky,
}

impl ExtendedSystem {
    pub fn build(problem: &SubdomainProblem, spaces: &LocalSpaces) -> Result<Self, MorError> {
        let mesh = &problem.mesh;
        let LocalSpaces {
            nodes, core, ext, ..
        } = spaces;
        let stiffness = assemble_stiffness(mesh, nodes, ext);
        let gram = stiffness.add_scaled(&assemble_mass(mesh, nodes, ext), 1.0);
        let boundary = ext.boundary_dofs(nodes, mesh.boundary_facets());
        let mut on_boundary = vec![false; ext.len()];
        for &b in &boundary {
            on_boundary[b] = true;
        }
        let interior: Vec<usize> = (0..ext.len()).filter(|&d| !on_boundary[d]).collect();
        let core_to_ext = core
            .nodes()
            .iter()
            .map(|&n| ext.dof(n).expect("core DOFs are extended DOFs"))
            .collect();
        let load = assemble_load(
            mesh,
            nodes,
            ext,
            &|x| problem.eval_load(x),
            LOAD_QUADRATURE_DEGREE,
        );
        let k_ii = SparseCholesky::new(
            &stiffness.submatrix(&interior, &interior),
            &format!(
                "interior stiffness of extended subdomain {}",
                problem.subdomain
            ),
        )?;
        Ok(Self {
            subdomain: problem.subdomain,
            stiffness,
            gram,
            boundary,
            interior,
            core_to_ext,
            load,
            k_ii,
        })
    }

    /// Number of core DOFs `m_i`.
    pub fn n_core(&self) -> usize {
        self.core_to_ext.len()
    }

    /// Number of boundary DOFs `K_i`.
    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn n_ext(&self) -> usize {
        self.stiffness.nrows
    }

    /// Position of each extended DOF in the interior and boundary lists.
    fn positions(&self) -> (Vec<usize>, Vec<usize>) {
        let mut pos_i = vec![usize::MAX; self.n_ext()];
        let mut pos_b = vec![usize::MAX; self.n_ext()];
        for (k, &d) in self.interior.iter().enumerate() {
            pos_i[d] = k;
        }
        for (k, &d) in self.boundary.iter().enumerate() {
            pos_b[d] = k;
        }
        (pos_i, pos_b)
    }

    /// Lifting matrix `Z` (`m_i x K_i`): column `g` is the discrete harmonic
    /// extension of the boundary basis function `g`, restricted to the core.
    pub fn lifting_matrix(&self) -> Mat<f64> {
        let (m, kb) = (self.n_core(), self.n_boundary());
        let (pos_i, pos_b) = self.positions();
        let mut z = Mat::<f64>::zeros(m, kb);
        let k_ib = self.stiffness.submatrix(&self.interior, &self.boundary);
        let ni = self.interior.len();
        // core rows that are interior in the extension
        let rows: Vec<(usize, usize)> = self
            .core_to_ext
            .iter()
            .enumerate()
            .filter_map(|(c, &d)| (pos_i[d] != usize::MAX).then_some((c, pos_i[d])))
            .collect();
        for (c, &d) in self.core_to_ext.iter().enumerate() {
            if pos_b[d] != usize::MAX {
                z[(c, pos_b[d])] = 1.0;
            }
        }
        if ni == 0 || kb == 0 {
            return z;
        }
        if rows.len() <= kb {
            // row c of Z is -(K_BI K_II^{-1} e_c)^T
            for chunk in rows.chunks(CHUNK) {
                let mut y = Mat::<f64>::zeros(ni, chunk.len());
                for (j, &(_, p)) in chunk.iter().enumerate() {
                    y[(p, j)] = 1.0;
                }
                self.k_ii.solve_in_place(y.as_mut());
                for (j, &(c, _)) in chunk.iter().enumerate() {
                    let row = k_ib.matvec_t(y.col_as_slice(j));
                    for (g, v) in row.into_iter().enumerate() {
                        z[(c, g)] = -v;
                    }
                }
            }
        } else {
            let k_bi = k_ib.transpose();
            let cols: Vec<usize> = (0..kb).collect();
            for chunk in cols.chunks(CHUNK) {
                let mut y = Mat::<f64>::zeros(ni, chunk.len());
                for (j, &g) in chunk.iter().enumerate() {
                    for (r, v) in k_bi.row(g) {
                        y[(r, j)] = -v;
                    }
                }
                self.k_ii.solve_in_place(y.as_mut());
                for (j, &g) in chunk.iter().enumerate() {
                    for &(c, p) in &rows {
                        z[(c, g)] = y[(p, j)];
                    }
                }
            }
        }
        z
    }

    /// Schur complement of the H1 Gram matrix onto the boundary DOFs,
    /// `N = G_BB - G_BI G_II^{-1} G_IB`.
    pub fn trace_weight(&self) -> Result<Mat<f64>, MorError> {
        let kb = self.n_boundary();
        let ni = self.interior.len();
        let g_bb = self.gram.submatrix(&self.boundary, &self.boundary);
        let mut n = g_bb.to_dense();
        if kb == 0 || ni == 0 {
            return Ok(n);
        }
        let g_ii = SparseCholesky::new(
            &self.gram.submatrix(&self.interior, &self.interior),
            &format!("interior H1 Gram of extended subdomain {}", self.subdomain),
        )?;
        let g_ib = self.gram.submatrix(&self.interior, &self.boundary);
        let g_bi = g_ib.transpose();
        let cols: Vec<usize> = (0..kb).collect();
        for chunk in cols.chunks(CHUNK) {
            let mut y = Mat::<f64>::zeros(ni, chunk.len());
            for (j, &g) in chunk.iter().enumerate() {
                for (r, v) in g_bi.row(g) {
                    y[(r, j)] = v;
                }
            }
            g_ii.solve_in_place(y.as_mut());
            for (j, &g) in chunk.iter().enumerate() {
                let col = g_bi.matvec(y.col_as_slice(j));
                for (r, v) in col.into_iter().enumerate() {
                    n[(r, g)] -= v;
                }
            }
        }
        symmetrize(&mut n);
        Ok(n)
    }

    /// Solution of the extended problem with the given load and zero data on
    /// the extension boundary, restricted to the core.
    pub fn particular_solution(&self) -> Vec<f64> {
        let rhs: Vec<f64> = self.interior.iter().map(|&d| self.load[d]).collect();
        let mut full = vec![0.0; self.n_ext()];
        if rhs.iter().any(|&v| v != 0.0) {
            for (&d, v) in self.interior.iter().zip(self.k_ii.solve(&rhs)) {
                full[d] = v;
            }
        }
        self.core_to_ext.iter().map(|&d| full[d]).collect()
    }
}

/// Core weight `M = K_core + (1/h_i) M_boundary` as a dense matrix.
pub fn core_weight(blocks: &LocalBlocks, h: f64) -> Mat<f64> {
    let mut m = blocks
        .stiffness
        .add_scaled(&blocks.boundary_mass, 1.0 / h)
        .to_dense();
    symmetrize(&mut m);
    m
}

fn symmetrize(a: &mut Mat<f64>) {
    for i in 0..a.nrows() {
        for j in i + 1..a.ncols() {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
