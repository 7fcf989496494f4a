use crate::fem::{Load, MeshNodes};
use crate::mesh::{
    extend_subdomains, extract_skeleton, partition_elements, Mesh, Partition, PartitionMethod,
    Skeleton,
};

use super::{HybridError, LocalBlocks, SubdomainProblem, TraceSpace};

/// A partitioned mesh with its skeleton and trace numbering: the data the
/// main process keeps.
pub struct Decomposition {
    pub mesh: Mesh,
    pub nodes: MeshNodes,
    pub partition: Partition,
    pub skeleton: Skeleton,
    pub trace: TraceSpace,
}

impl Decomposition {
    /// Partitions into `n` parts and extends each by `radius` (absolute).
    pub fn new(
        mesh: Mesh,
        degree: usize,
        n: usize,
        method: &PartitionMethod,
        radius: f64,
    ) -> Result<Self, HybridError> {
        let partition = partition_elements(&mesh, n, method)?;
        let partition = extend_subdomains(&mesh, &partition, radius);
        Self::from_partition(mesh, degree, partition)
    }

    pub fn from_partition(
        mesh: Mesh,
        degree: usize,
        partition: Partition,
    ) -> Result<Self, HybridError> {
        let nodes = MeshNodes::with_boundary(&mesh, degree);
        let skeleton = extract_skeleton(&mesh, &partition)?;
        let trace = TraceSpace::new(&nodes, &skeleton);
        Ok(Self {
            mesh,
            nodes,
            partition,
            skeleton,
            trace,
        })
    }

    pub fn n(&self) -> usize {
        self.partition.n
    }

    pub fn problem(
        &self,
        i: usize,
        alpha: f64,
        load: Load,
    ) -> Result<SubdomainProblem, HybridError> {
        SubdomainProblem::extract(
            &self.mesh,
            &self.nodes,
            &self.partition,
            &self.skeleton,
            &self.trace,
            i,
            alpha,
            load,
        )
    }

    pub fn local_blocks(&self, alpha: f64, load: Load) -> Result<Vec<LocalBlocks>, HybridError> {
        (0..self.n())
            .map(|i| {
                let p = self.problem(i, alpha, load)?;
                Ok(LocalBlocks::assemble(&p, &p.spaces()))
            })
            .collect()
    }
}
