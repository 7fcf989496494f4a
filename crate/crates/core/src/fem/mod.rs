//! P1 and P2 Lagrange finite elements on triangles and tetrahedra.

mod assembly;
mod basis;
mod conforming;
mod dofmap;
mod quadrature;
mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_load, assemble_mass, assemble_normal_flux, assemble_stiffness,
    element_stiffness, LOAD_QUADRATURE_DEGREE,
};
pub use basis::{LagrangeBasis, LocalNode, ReferenceElement};
pub use conforming::{conforming_solve, ConformingSolution};
pub use dofmap::{lattice_counts, DofMap, MeshNodes, NodeIndex};
pub use quadrature::{gauss_legendre, QuadratureRule};
pub use sparse::{CsrMatrix, TripletBuilder};

use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("polynomial degree {0} is not supported (use 1 or 2)")]
    Degree(usize),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// Right-hand sides selectable by name in task files and configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Load {
    Zero,
    One,
    /// `-lap u` for the polynomial bubble `u` vanishing on the boundary of the
    /// unit square or cube, scaled so that `|grad u|^2` integrates to one.
    Bubble,
}

impl Load {
    pub fn eval(self, dim: usize, x: &[f64; 3]) -> f64 {
        match self {
            Load::Zero => 0.0,
            Load::One => 1.0,
            Load::Bubble => {
                let q = |t: f64| t * (1.0 - t);
                if dim == 2 {
                    2.0 * 45f64.sqrt() * (q(x[0]) + q(x[1]))
                } else {
                    60.0 * (q(x[0]) * q(x[1]) + q(x[0]) * q(x[2]) + q(x[1]) * q(x[2]))
                }
            }
        }
    }

    /// Exact `|grad u|^2` integral where known.
    pub fn exact_energy(self) -> Option<f64> {
        match self {
            Load::Zero => Some(0.0),
            Load::Bubble => Some(1.0),
            Load::One => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Load::Zero => 0,
            Load::One => 1,
            Load::Bubble => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Load::Zero),
            1 => Some(Load::One),
            2 => Some(Load::Bubble),
            _ => None,
        }
    }
}

impl fmt::Display for Load {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Load::Zero => "zero",
            Load::One => "one",
            Load::Bubble => "bubble",
        })
    }
}

impl FromStr for Load {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(Load::Zero),
            "one" => Ok(Load::One),
            "bubble" => Ok(Load::Bubble),
            other => Err(format!("unknown load '{other}' (zero, one, bubble)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_load_integral_matches_analytic() {
        // int f over the cube: 60 * 3 * (1/6)^2 = 5; over the square:
        // 2 sqrt(45) * 2 / 6
        let mesh = crate::mesh::generate_structured_mesh(3, 3).unwrap();
        let nodes = MeshNodes::new(&mesh, 1, &[]);
        let all: Vec<usize> = (0..mesh.n_elements()).collect();
        let dofs = DofMap::new(&nodes, &all);
        let f = assemble_load(
            &mesh,
            &nodes,
            &dofs,
            &|x| Load::Bubble.eval(3, x),
            LOAD_QUADRATURE_DEGREE,
        );
        let total: f64 = f.iter().sum();
        assert!((total - 5.0).abs() < 1e-10 * 5.0);

        let mesh = crate::mesh::generate_structured_mesh(2, 3).unwrap();
        let nodes = MeshNodes::new(&mesh, 2, &[]);
        let all: Vec<usize> = (0..mesh.n_elements()).collect();
        let dofs = DofMap::new(&nodes, &all);
        let f = assemble_load(
            &mesh,
            &nodes,
            &dofs,
            &|x| Load::Bubble.eval(2, x),
            LOAD_QUADRATURE_DEGREE,
        );
        let exact = 2.0 * 45f64.sqrt() / 3.0;
        assert!((f.iter().sum::<f64>() - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn load_names_round_trip() {
        for l in [Load::Zero, Load::One, Load::Bubble] {
            assert_eq!(l.to_string().parse::<Load>().unwrap(), l);
            assert_eq!(Load::from_code(l.code()), Some(l));
        }
    }
}
