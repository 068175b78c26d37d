//! Coarsening functions: maps from a graph to a set of super-nodes with the
//! connectivity they inherit from the graph.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, Graph};
use crate::linalg::{fix_signs, jacobi_eigen, Matrix};

/// Super-nodes (sorted node-id sets) and the coarse edges between them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarsePartition {
    super_nodes: Vec<Vec<usize>>,
    coarse_edges: Vec<(usize, usize)>,
    source_n: usize,
}

impl CoarsePartition {
    /// Builds a coarsening from arbitrary super-node sets; coarse edges are
    /// induced from `g`.
    pub fn from_supers(g: &Graph, supers: Vec<Vec<usize>>) -> Result<Self> {
        let mut cleaned = Vec::with_capacity(supers.len());
        for mut s in supers {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::contract("super-nodes must be non-empty"));
            }
            if let Some(&v) = s.iter().find(|&&v| v >= g.num_nodes()) {
                return Err(Error::contract(format!("super-node member {v} out of range")));
            }
            cleaned.push(s);
        }
        let coarse_edges = induced_edges(g, &cleaned);
        Ok(Self { super_nodes: cleaned, coarse_edges, source_n: g.num_nodes() })
    }

    pub fn super_nodes(&self) -> &[Vec<usize>] {
        &self.super_nodes
    }

    pub fn coarse_edges(&self) -> &[(usize, usize)] {
        &self.coarse_edges
    }

    pub fn num_supers(&self) -> usize {
        self.super_nodes.len()
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    /// True when the super-nodes are disjoint and cover every node.
    pub fn is_partition(&self) -> bool {
        let mut seen = vec![false; self.source_n];
        for s in &self.super_nodes {
            for &v in s {
                if seen[v] {
                    return false;
                }
                seen[v] = true;
            }
        }
        seen.into_iter().all(|x| x)
    }

    /// Membership lists: for every node, the indices of the super-nodes
    /// containing it, ascending.
    pub fn memberships(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.source_n];
        for (i, s) in self.super_nodes.iter().enumerate() {
            for &v in s {
                m[v].push(i);
            }
        }
        m
    }

    pub fn dense_adjacency(&self) -> Matrix<f64> {
        let t = self.num_supers();
        let mut a = Matrix::zeros(t, t);
        for &(i, j) in &self.coarse_edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Relabel the nodes inside every super-node (old `v` becomes
    /// `perm[v]`); super-node order and coarse edges are unchanged.
    pub fn permute_nodes(&self, perm: &[usize]) -> Self {
        let super_nodes = self
            .super_nodes
            .iter()
            .map(|s| {
                let mut t: Vec<usize> = s.iter().map(|&v| perm[v]).collect();
                t.sort_unstable();
                t
            })
            .collect();
        Self { super_nodes, coarse_edges: self.coarse_edges.clone(), source_n: self.source_n }
    }

    /// The super-nodes as a set, ignoring their order.
    pub fn super_set(&self) -> BTreeSet<Vec<usize>> {
        self.super_nodes.iter().cloned().collect()
    }

    /// Coarse edges expressed through the member sets of their endpoints.
    pub fn coarse_edge_set(&self) -> BTreeSet<(Vec<usize>, Vec<usize>)> {
        self.coarse_edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (self.super_nodes[i].clone(), self.super_nodes[j].clone());
                if a <= b { (a, b) } else { (b, a) }
            })
            .collect()
    }
}

/// Pairs of distinct super-nodes joined by at least one graph edge.
/// Returned sorted, smaller index first.
pub fn induced_edges(g: &Graph, supers: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut member_of = vec![Vec::new(); g.num_nodes()];
    for (i, s) in supers.iter().enumerate() {
        for &v in s {
            member_of[v].push(i);
        }
    }
    let mut out = BTreeSet::new();
    for &(u, v) in g.edges() {
        for &a in &member_of[u] {
            for &b in &member_of[v] {
                if a != b {
                    out.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// One singleton super-node per node.
pub fn identity_coarsen(g: &Graph) -> CoarsePartition {
    CoarsePartition::from_supers(g, (0..g.num_nodes()).map(|v| vec![v]).collect())
        .expect("singletons are valid")
}

/// A single super-node holding every node of degree 3.
pub fn degree3_coarsen(g: &Graph) -> Result<CoarsePartition> {
    let members: Vec<usize> =
        g.degrees().iter().enumerate().filter(|(_, &d)| d == 3).map(|(v, _)| v).collect();
    if members.is_empty() {
        return Err(Error::EmptyCoarsening("graph has no node of degree 3".into()));
    }
    CoarsePartition::from_supers(g, vec![members])
}

/// Singletons followed by one super-node per edge (in edge order). Not a
/// partition whenever the graph has an edge.
pub fn node_plus_edge_coarsen(g: &Graph) -> CoarsePartition {
    let mut supers: Vec<Vec<usize>> = (0..g.num_nodes()).map(|v| vec![v]).collect();
    supers.extend(g.edges().iter().map(|&(u, v)| vec![u, v]));
    CoarsePartition::from_supers(g, supers).expect("singletons and edges are valid")
}

/// The whole node set as one super-node.
pub fn single_coarsen(g: &Graph) -> Result<CoarsePartition> {
    if g.num_nodes() == 0 {
        return Err(Error::EmptyCoarsening("graph has no nodes".into()));
    }
    CoarsePartition::from_supers(g, vec![(0..g.num_nodes()).collect()])
}

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-9;
const EIG_CLUSTER_TOL: f64 = 1e-9;
const SKEW_TOL: f64 = 1e-9;

/// Spectral clustering: k-means on the `lap_dim` eigenvectors of the
/// normalised Laplacian with the smallest eigenvalues.
///
/// Degenerate eigenspaces are replaced by a canonical basis (projections of
/// the standard basis vectors, Gram-Schmidt in node order) so the embedding
/// does not depend on rotations chosen by the eigensolver. k-means sees the
/// rows sorted by their coordinates, so on graphs with a simple spectrum a
/// relabelling of the nodes does not change which clusters come out.
/// Super-nodes are ordered by their smallest member; empty clusters are
/// dropped.
pub fn spectral_coarsen(
    g: &Graph,
    num_clusters: usize,
    lap_dim: usize,
    seed: u64,
) -> Result<CoarsePartition> {
    let n = g.num_nodes();
    if num_clusters == 0 || num_clusters > n {
        return Err(Error::contract(format!("num_clusters = {num_clusters} outside 1..={n}")));
    }
    if lap_dim == 0 || lap_dim > n {
        return Err(Error::contract(format!("lap_dim = {lap_dim} outside 1..={n}")));
    }
    let labels = if num_clusters == n {
        (0..n).collect()
    } else {
        let emb = spectral_embedding(g, lap_dim)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            emb.row(a)
                .iter()
                .zip(emb.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let sorted = Matrix::from_fn(n, lap_dim, |r, c| emb[(order[r], c)]);
        let mut labels = vec![0; n];
        for (r, c) in kmeans(&sorted, num_clusters, seed).into_iter().enumerate() {
            labels[order[r]] = c;
        }
        labels
    };
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); num_clusters];
    for (v, &c) in labels.iter().enumerate() {
        groups[c].push(v);
    }
    let mut supers: Vec<Vec<usize>> = groups.into_iter().filter(|s| !s.is_empty()).collect();
    supers.sort_by_key(|s| s[0]);
    CoarsePartition::from_supers(g, supers)
}

/// Rows are nodes, columns the first `lap_dim` canonicalised eigenvectors.
/// Each column is oriented so the sum of its cubed entries is positive;
/// columns where that sum vanishes keep the first-nonzero-positive sign.
pub fn spectral_embedding(g: &Graph, lap_dim: usize) -> Result<Matrix<f64>> {
    let n = g.num_nodes();
    let eig = jacobi_eigen(&normalized_laplacian::<f64>(g))?;
    let mut vecs = eig.vectors.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eig.values[end] - eig.values[start]).abs() <= EIG_CLUSTER_TOL {
            end += 1;
        }
        if end - start > 1 && start < lap_dim {
            let basis = canonical_basis(&eig.vectors, start, end);
            for (j, b) in basis.into_iter().enumerate() {
                for r in 0..n {
                    vecs[(r, start + j)] = b[r];
                }
            }
        }
        start = end;
    }
    fix_signs(&mut vecs);
    for c in 0..lap_dim {
        let skew: f64 = (0..n).map(|r| vecs[(r, c)].powi(3)).sum();
        if skew < -SKEW_TOL {
            for r in 0..n {
                vecs[(r, c)] = -vecs[(r, c)];
            }
        }
    }
    Ok(Matrix::from_fn(n, lap_dim, |r, c| vecs[(r, c)]))
}

fn canonical_basis(vectors: &Matrix<f64>, start: usize, end: usize) -> Vec<Vec<f64>> {
    let n = vectors.rows();
    let want = end - start;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(want);
    for i in 0..n {
        if out.len() == want {
            break;
        }
        // projection of e_i onto the eigenspace
        let mut w: Vec<f64> = vec![0.0; n];
        for c in start..end {
            let coef = vectors[(i, c)];
            for r in 0..n {
                w[r] += coef * vectors[(r, c)];
            }
        }
        for b in &out {
            let dot: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            for r in 0..n {
                w[r] -= dot * b[r];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(w.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding. Returns a cluster label per row.
/// Ties go to the lowest cluster index; an empty cluster keeps its centroid.
pub fn kmeans(points: &Matrix<f64>, k: usize, seed: u64) -> Vec<usize> {
    let n = points.rows();
    assert!(k >= 1 && k <= n, "k out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            while d2[pick] <= 0.0 {
                pick -= 1;
            }
            pick
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    let dim = points.cols();
    let mut centers: Vec<Vec<f64>> = chosen.iter().map(|&i| points.row(i).to_vec()).collect();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(points.row(i), center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, &x) in sums[labels[i]].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mean: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&mean, &centers[c]).sqrt());
            centers[c] = mean;
        }
        if !changed || shift < KMEANS_TOL {
            break;
        }
    }
    labels
}

/// Which coarsening function to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoarseningSpec {
    Spectral { clusters: usize, lap_dim: usize },
    Identity,
    Degree3,
    NodePlusEdge,
    Single,
}

impl CoarseningSpec {
    /// Spectral clustering clamps `clusters` and `lap_dim` to the graph size.
    pub fn apply(&self, g: &Graph, seed: u64) -> Result<CoarsePartition> {
        match *self {
            CoarseningSpec::Spectral { clusters, lap_dim } => {
                let n = g.num_nodes();
                spectral_coarsen(g, clusters.min(n), lap_dim.min(n), seed)
            }
            CoarseningSpec::Identity => Ok(identity_coarsen(g)),
            CoarseningSpec::Degree3 => degree3_coarsen(g),
            CoarseningSpec::NodePlusEdge => Ok(node_plus_edge_coarsen(g)),
            CoarseningSpec::Single => single_coarsen(g),
        }
    }

    /// Whether relabelling the input relabels the output exactly.
    pub fn is_equivariant(&self) -> bool {
        !matches!(self, CoarseningSpec::Spectral { .. })
    }
}

impl fmt::Display for CoarseningSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoarseningSpec::Spectral { .. } => f.write_str("spectral"),
            CoarseningSpec::Identity => f.write_str("identity"),
            CoarseningSpec::Degree3 => f.write_str("degree3"),
            CoarseningSpec::NodePlusEdge => f.write_str("node_plus_edge"),
            CoarseningSpec::Single => f.write_str("single"),
        }
    }
}

/// Parses the coarsening kind; spectral takes its sizes from elsewhere and
/// starts at `clusters = 2, lap_dim = 2`.
impl FromStr for CoarseningSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "spectral" => CoarseningSpec::Spectral { clusters: 2, lap_dim: 2 },
            "identity" => CoarseningSpec::Identity,
            "degree3" => CoarseningSpec::Degree3,
            "node_plus_edge" => CoarseningSpec::NodePlusEdge,
            "single" => CoarseningSpec::Single,
            other => return Err(Error::contract(format!("unknown coarsening '{other}'"))),
        })
    }
}

/// Histogram of super-node sizes, used where only the permutation-invariant
/// shape of a coarsening can be compared.
pub fn size_profile(cp: &CoarsePartition) -> Vec<usize> {
    let mut sizes: Vec<usize> = cp.super_nodes().iter().map(Vec::len).collect();
    sizes.sort_unstable();
    sizes
}

/// Maps each node to the single super-node containing it. Only defined for
/// partitions.
pub fn owner_map(cp: &CoarsePartition) -> Option<HashMap<usize, usize>> {
    if !cp.is_partition() {
        return None;
    }
    let mut m = HashMap::new();
    for (i, s) in cp.super_nodes().iter().enumerate() {
        for &v in s {
            m.insert(v, i);
        }
    }
    Some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn running_example() -> (Graph, Vec<Vec<usize>>) {
        // a..f = 0..5; {a,b,c,d} is a 4-cycle with a chord, e hangs off d
        // and f hangs off e.
        let g = Graph::unlabeled(6, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (4, 5)])
            .unwrap();
        (g, vec![vec![0, 1, 2, 3], vec![4], vec![5]])
    }

    #[test]
    fn running_example_induced_edges() {
        let (g, supers) = running_example();
        let edges = induced_edges(&g, &supers);
        assert!(edges.contains(&(0, 1)));
        assert!(!edges.contains(&(0, 2)));
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn identity_single_edge() {
        let g = Graph::path(2);
        let cp = identity_coarsen(&g);
        assert_eq!(cp.super_nodes(), &[vec![0], vec![1]]);
        assert_eq!(cp.coarse_edges(), &[(0, 1)]);
        assert!(cp.is_partition());
    }

    #[test]
    fn degree3_cases() {
        assert_eq!(degree3_coarsen(&Graph::complete(4)).unwrap().super_nodes(), &[vec![0, 1, 2, 3]]);
        assert!(matches!(degree3_coarsen(&Graph::cycle(5)), Err(Error::EmptyCoarsening(_))));
    }

    #[test]
    fn node_plus_edge_shapes() {
        let cp = node_plus_edge_coarsen(&Graph::path(2));
        assert_eq!(cp.super_nodes(), &[vec![0], vec![1], vec![0, 1]]);
        assert!(!cp.is_partition());
        let tri = node_plus_edge_coarsen(&Graph::cycle(3));
        assert_eq!(tri.num_supers(), 6);
    }

    #[test]
    fn spectral_extremes() {
        let g = Graph::cycle(6);
        let all = spectral_coarsen(&g, 6, 3, 0).unwrap();
        assert_eq!(all.num_supers(), 6);
        assert!(all.super_nodes().iter().all(|s| s.len() == 1));
        let one = spectral_coarsen(&g, 1, 2, 0).unwrap();
        assert_eq!(one.super_nodes(), &[(0..6).collect::<Vec<_>>()]);
        assert!(one.coarse_edges().is_empty());
        assert!(spectral_coarsen(&g, 7, 2, 0).is_err());
        assert!(spectral_coarsen(&g, 2, 0, 0).is_err());
    }

    #[test]
    fn spectral_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = Graph::random(9, 0.3, &mut rng);
            let a = spectral_coarsen(&g, 3, 3, 17).unwrap();
            let b = spectral_coarsen(&g, 3, 3, 17).unwrap();
            assert_eq!(a, b);
            assert!(a.is_partition());
        }
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.extend_from_slice(&[0.0 + i as f64 * 0.01, 0.0]);
        }
        for i in 0..5 {
            pts.extend_from_slice(&[10.0 + i as f64 * 0.01, 10.0]);
        }
        let m = Matrix::from_vec(10, 2, pts).unwrap();
        for seed in 0..20 {
            let l = kmeans(&m, 2, seed);
            assert!(l[..5].iter().all(|&x| x == l[0]));
            assert!(l[5..].iter().all(|&x| x == l[5]));
            assert_ne!(l[0], l[5]);
        }
    }

    #[test]
    fn permute_nodes_resorts_members() {
        let (g, supers) = running_example();
        let cp = CoarsePartition::from_supers(&g, supers).unwrap();
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        let p = cp.permute_nodes(&perm);
        assert!(p.super_nodes().iter().all(|s| s.windows(2).all(|w| w[0] < w[1])));
        assert_eq!(size_profile(&p), size_profile(&cp));
    }
}
