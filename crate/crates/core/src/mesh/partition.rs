use std::path::{Path, PathBuf};

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use super::{Mesh, MeshError};

/// How elements are assigned to subdomains.
#[derive(Clone, Debug, PartialEq)]
pub enum PartitionMethod {
    /// Recursive coordinate bisection of element centroids.
    Rcb,
    /// One subdomain id per line, line `k` for element `k`.
    File(PathBuf),
}

/// Element-to-subdomain assignment with the overlapping extensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub n: usize,
    pub part_of: Vec<usize>,
    pub core_elems: Vec<Vec<usize>>,
    /// Extended element sets; equal to `core_elems` until
    /// [`extend_subdomains`] is applied.
    pub ext_elems: Vec<Vec<usize>>,
    /// Subdomain mesh size: maximum element diameter in the core set.
    pub h_sub: Vec<f64>,
    /// Maximum number of extended sets containing a single element.
    pub overlap: usize,
}

impl Partition {
    pub fn from_assignment(mesh: &Mesh, n: usize, part_of: Vec<usize>) -> Result<Self, MeshError> {
        if part_of.len() != mesh.n_elements() {
            return Err(MeshError::Partition(format!(
                "{} subdomain ids for {} elements",
                part_of.len(),
                mesh.n_elements()
            )));
        }
        let mut core_elems = vec![Vec::new(); n];
        for (e, &p) in part_of.iter().enumerate() {
            if p >= n {
                return Err(MeshError::Partition(format!(
                    "element {e} assigned to subdomain {p} but n = {n}"
                )));
            }
            core_elems[p].push(e);
        }
        for (i, c) in core_elems.iter().enumerate() {
            if c.is_empty() {
                log::warn!("subdomain {i} is empty");
            }
        }
        let h_sub = core_elems
            .iter()
            .map(|c| c.iter().map(|&e| mesh.diameter(e)).fold(0.0, f64::max))
            .collect();
        let ext_elems = core_elems.clone();
        Ok(Self {
            n,
            part_of,
            core_elems,
            ext_elems,
            h_sub,
            overlap: 1,
        })
    }

    pub fn empty_subdomains(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.core_elems[i].is_empty())
            .collect()
    }

    /// Ratio of the largest to the smallest subdomain mesh size.
    pub fn h_ratio(&self) -> f64 {
        let max = self.h_sub.iter().cloned().fold(0.0, f64::max);
        let min = self.h_sub.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

pub fn partition_elements(
    mesh: &Mesh,
    n: usize,
    method: &PartitionMethod,
) -> Result<Partition, MeshError> {
    if n == 0 || n > mesh.n_elements() {
        return Err(MeshError::Partition(format!(
            "cannot split {} elements into {n} subdomains",
            mesh.n_elements()
        )));
    }
    match method {
        PartitionMethod::Rcb => {
            let centroids: Vec<[f64; 3]> =
                (0..mesh.n_elements()).map(|e| mesh.centroid(e)).collect();
            let mut part_of = vec![0; mesh.n_elements()];
            let mut elems: Vec<usize> = (0..mesh.n_elements()).collect();
            bisect(&centroids, &mut elems, 0, n, &mut part_of);
            Partition::from_assignment(mesh, n, part_of)
        }
        PartitionMethod::File(path) => {
            let part_of = read_partition_file(path)?;
            Partition::from_assignment(mesh, n, part_of)
        }
    }
}

fn bisect(
    centroids: &[[f64; 3]],
    elems: &mut [usize],
    first: usize,
    n: usize,
    part_of: &mut [usize],
) {
    if n == 1 {
        for &e in elems.iter() {
            part_of[e] = first;
        }
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &e in elems.iter() {
        for r in 0..3 {
            lo[r] = lo[r].min(centroids[e][r]);
            hi[r] = hi[r].max(centroids[e][r]);
        }
    }
    let mut axis = 0;
    for r in 1..3 {
        if hi[r] - lo[r] > hi[axis] - lo[axis] {
            axis = r;
        }
    }
    elems.sort_by(|&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let n_left = n / 2;
    let split = (elems.len() * n_left + n / 2) / n;
    let (left, right) = elems.split_at_mut(split);
    bisect(centroids, left, first, n_left, part_of);
    bisect(centroids, right, first + n_left, n - n_left, part_of);
}

pub fn read_partition_file(path: impl AsRef<Path>) -> Result<Vec<usize>, MeshError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| MeshError::Parse {
                line: i + 1,
                message: format!("invalid subdomain id '{}'", l.trim()),
            })
        })
        .collect()
}

pub fn write_partition_file(
    partition: &Partition,
    path: impl AsRef<Path>,
) -> Result<(), MeshError> {
    let mut s = String::with_capacity(partition.part_of.len() * 4);
    for p in &partition.part_of {
        s.push_str(&p.to_string());
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Strict distance test with a relative guard, so lattice points lying exactly
/// at distance `r` are excluded regardless of rounding.
fn within(a: &[f64; 3], b: &[f64; 3], r: f64) -> bool {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
    d2 < r * r * (1.0 - 1e-10)
}

/// Grows every core set by the elements having a vertex closer than `r` to a
/// core vertex, and recomputes the overlap multiplicity.
pub fn extend_subdomains(mesh: &Mesh, partition: &Partition, r: f64) -> Partition {
    assert!(r >= 0.0, "extension radius must be nonnegative");
    let mut out = partition.clone();
    // vertex -> elements
    let mut vert_elems: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for e in 0..mesh.n_elements() {
        for &v in mesh.element(e) {
            vert_elems[v].push(e);
        }
    }
    let tree = (r > 0.0).then(|| {
        ImmutableKdTree::<f64, 3>::new_from_slice(mesh.vertices())
            .expect("kd-tree construction over mesh vertices")
    });
    let mut near = vec![false; mesh.n_vertices()];
    let mut in_ext = vec![false; mesh.n_elements()];
    for i in 0..partition.n {
        let core = &partition.core_elems[i];
        let mut ext: Vec<usize> = core.clone();
        if let Some(tree) = &tree {
            near.iter_mut().for_each(|x| *x = false);
            in_ext.iter_mut().for_each(|x| *x = false);
            for &e in core {
                in_ext[e] = true;
            }
            let mut core_vertices: Vec<usize> = core
                .iter()
                .flat_map(|&e| mesh.element(e).iter().copied())
                .collect();
            core_vertices.sort_unstable();
            core_vertices.dedup();
            for &v in &core_vertices {
                let x = mesh.vertex(v);
                let hits = tree
                    .query(x)
                    .within::<SquaredEuclidean<f64>>(r * r)
                    .unsorted()
                    .execute();
                for hit in hits {
                    let w = hit.item as usize;
                    if within(x, mesh.vertex(w), r) {
                        near[w] = true;
                    }
                }
            }
            for (v, _) in near.iter().enumerate().filter(|(_, &n)| n) {
                for &e in &vert_elems[v] {
                    if !in_ext[e] {
                        in_ext[e] = true;
                        ext.push(e);
                    }
                }
            }
            ext[core.len()..].sort_unstable();
        }
        out.ext_elems[i] = ext;
    }
    let mut count = vec![0usize; mesh.n_elements()];
    for ext in &out.ext_elems {
        for &e in ext {
            count[e] += 1;
        }
    }
    out.overlap = count.into_iter().max().unwrap_or(0);
    out
}
