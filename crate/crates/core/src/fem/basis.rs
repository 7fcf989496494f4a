//! Lagrange bases of degree 1 and 2 written in barycentric coordinates, and
//! the reference integrals from which affine element matrices are scaled.

use super::quadrature::QuadratureRule;

/// Position of a local basis node: a vertex, or the midpoint of the edge
/// between two local vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalNode {
    Vertex(usize),
    Edge(usize, usize),
}

#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    pub dim: usize,
    pub degree: usize,
    pub nodes: Vec<LocalNode>,
}

impl LagrangeBasis {
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!(degree == 1 || degree == 2, "only P1 and P2 are available");
        let mut nodes: Vec<LocalNode> = (0..=dim).map(LocalNode::Vertex).collect();
        if degree == 2 {
            for a in 0..=dim {
                for b in a + 1..=dim {
                    nodes.push(LocalNode::Edge(a, b));
                }
            }
        }
        Self { dim, degree, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, bary: &[f64; 4], out: &mut [f64]) {
        for (a, node) in self.nodes.iter().enumerate() {
            out[a] = match (*node, self.degree) {
                (LocalNode::Vertex(i), 1) => bary[i],
                (LocalNode::Vertex(i), _) => bary[i] * (2.0 * bary[i] - 1.0),
                (LocalNode::Edge(i, j), _) => 4.0 * bary[i] * bary[j],
            };
        }
    }

    /// Derivatives with respect to each barycentric coordinate.
    pub fn dbary(&self, bary: &[f64; 4], out: &mut [[f64; 4]]) {
        for (a, node) in self.nodes.iter().enumerate() {
            out[a] = [0.0; 4];
            match (*node, self.degree) {
                (LocalNode::Vertex(i), 1) => out[a][i] = 1.0,
                (LocalNode::Vertex(i), _) => out[a][i] = 4.0 * bary[i] - 1.0,
                (LocalNode::Edge(i, j), _) => {
                    out[a][i] = 4.0 * bary[j];
                    out[a][j] = 4.0 * bary[i];
                }
            }
        }
    }

    /// Local nodes lying on the facet opposite local vertex `local`.
    pub fn facet_nodes(&self, local: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| match **n {
                LocalNode::Vertex(i) => i != local,
                LocalNode::Edge(i, j) => i != local && j != local,
            })
            .map(|(a, _)| a)
            .collect()
    }
}

/// Reference integrals on one facet, normalised by the facet measure.
#[derive(Clone, Debug)]
pub struct FacetTables {
    /// Element-local nodes on the facet.
    pub nodes: Vec<usize>,
    /// `mass[p * nf + q]` = mean of phi_{nodes[p]} phi_{nodes[q]}.
    pub mass: Vec<f64>,
    /// `flux[(a * nf + q)][k]` = mean of d phi_a / d lambda_k times phi_{nodes[q]}.
    pub flux: Vec<[f64; 4]>,
}

/// Element integrals on the reference simplex, normalised by its measure so
/// that affine elements only need a volume (or facet measure) scaling.
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    pub basis: LagrangeBasis,
    /// `stiff[a * n + b][k][l]` = mean of (d phi_a / d lambda_k)(d phi_b / d lambda_l).
    pub stiff: Vec<[[f64; 4]; 4]>,
    /// `mass[a * n + b]` = mean of phi_a phi_b.
    pub mass: Vec<f64>,
    pub facets: Vec<FacetTables>,
}

impl ReferenceElement {
    pub fn new(dim: usize, degree: usize) -> Self {
        let basis = LagrangeBasis::new(dim, degree);
        let n = basis.len();
        let rule = QuadratureRule::simplex(dim, 2 * degree);
        let measure = rule.reference_measure();
        let mut stiff = vec![[[0.0; 4]; 4]; n * n];
        let mut mass = vec![0.0; n * n];
        let mut phi = vec![0.0; n];
        let mut dphi = vec![[0.0; 4]; n];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let w = w / measure;
            basis.eval(p, &mut phi);
            basis.dbary(p, &mut dphi);
            for a in 0..n {
                for b in 0..n {
                    mass[a * n + b] += w * phi[a] * phi[b];
                    for k in 0..=dim {
                        for l in 0..=dim {
                            stiff[a * n + b][k][l] += w * dphi[a][k] * dphi[b][l];
                        }
                    }
                }
            }
        }
        let frule = QuadratureRule::simplex(dim - 1, 2 * degree);
        let fmeasure = frule.reference_measure();
        let facets = (0..=dim)
            .map(|local| {
                let nodes = basis.facet_nodes(local);
                let nf = nodes.len();
                let mut fmass = vec![0.0; nf * nf];
                let mut flux = vec![[0.0; 4]; n * nf];
                for (q, &w) in frule.points.iter().zip(&frule.weights) {
                    let w = w / fmeasure;
                    let bary = embed_facet_point(dim, local, q);
                    basis.eval(&bary, &mut phi);
                    basis.dbary(&bary, &mut dphi);
                    for (p, &na) in nodes.iter().enumerate() {
                        for (r, &nb) in nodes.iter().enumerate() {
                            fmass[p * nf + r] += w * phi[na] * phi[nb];
                        }
                    }
                    for a in 0..n {
                        for (r, &nb) in nodes.iter().enumerate() {
                            for k in 0..=dim {
                                flux[a * nf + r][k] += w * dphi[a][k] * phi[nb];
                            }
                        }
                    }
                }
                FacetTables {
                    nodes,
                    mass: fmass,
                    flux,
                }
            })
            .collect();
        Self {
            basis,
            stiff,
            mass,
            facets,
        }
    }

    pub fn n_local(&self) -> usize {
        self.basis.len()
    }
}

/// Maps barycentric coordinates of a facet rule to element barycentrics with
/// a zero in the slot of the opposite vertex.
pub fn embed_facet_point(dim: usize, local: usize, facet_bary: &[f64; 4]) -> [f64; 4] {
    let mut bary = [0.0; 4];
    let mut k = 0;
    for (slot, b) in bary.iter_mut().enumerate().take(dim + 1) {
        if slot != local {
            *b = facet_bary[k];
            k += 1;
        }
    }
    bary
}
