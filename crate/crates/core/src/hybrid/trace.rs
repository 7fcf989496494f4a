use std::collections::BTreeMap;

use crate::fem::{MeshNodes, NodeIndex};
use crate::mesh::Skeleton;

/// Continuous Lagrange trace space on the interface skeleton. Nodes on the
/// outer boundary are constrained to zero and carry no DOF.
#[derive(Clone, Debug)]
pub struct TraceSpace {
    pub degree: usize,
    nodes: Vec<usize>,
    index: Vec<u32>,
}

impl TraceSpace {
    /// `nodes` must be the global node numbering with the outer boundary
    /// constrained.
    pub fn new(nodes: &MeshNodes, skeleton: &Skeleton) -> Self {
        let mut used = vec![false; nodes.n_nodes()];
        for f in skeleton.interface_facets() {
            for n in nodes.facet_nodes(f.sides[0].facet) {
                if !nodes.is_constrained(n) {
                    used[n] = true;
                }
            }
        }
        let mut index = vec![u32::MAX; nodes.n_nodes()];
        let mut list = Vec::new();
        for (n, _) in used.iter().enumerate().filter(|(_, &u)| u) {
            index[n] = list.len() as u32;
            list.push(n);
        }
        Self {
            degree: nodes.degree,
            nodes: list,
            index,
        }
    }

    /// Number of free trace DOFs.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global node of each trace DOF.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }
}

impl NodeIndex for TraceSpace {
    fn index_of(&self, node: usize) -> Option<usize> {
        match self.index.get(node) {
            Some(&i) if i != u32::MAX => Some(i as usize),
            _ => None,
        }
    }

    fn size(&self) -> usize {
        self.len()
    }
}

/// The trace DOFs touching one subdomain, numbered locally in increasing
/// global order, keyed by subdomain-local node ids.
#[derive(Clone, Debug, Default)]
pub struct LocalTrace {
    /// Global trace index of each local trace DOF.
    pub global: Vec<usize>,
    of_node: BTreeMap<usize, usize>,
}

impl LocalTrace {
    /// Builds from `(local node, global trace index)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let map: BTreeMap<usize, usize> = pairs.into_iter().collect();
        let mut global: Vec<usize> = map.values().copied().collect();
        global.sort_unstable();
        global.dedup();
        let of_node = map
            .into_iter()
            .map(|(node, g)| (node, global.binary_search(&g).unwrap()))
            .collect();
        Self { global, of_node }
    }

    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }
}

impl NodeIndex for LocalTrace {
    fn index_of(&self, node: usize) -> Option<usize> {
        self.of_node.get(&node).copied()
    }

    fn size(&self) -> usize {
        self.len()
    }
}
