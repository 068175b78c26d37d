//! Undirected graphs with categorical features, hop distances and the
//! normalised Laplacian.

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Simple undirected graph. Edges are stored with the smaller endpoint
/// first, in insertion order; `edge_feat[i]` belongs to `edges[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    node_feat: Vec<u32>,
    edge_feat: Vec<u32>,
}

impl Graph {
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        node_feat: Vec<u32>,
        edge_feat: Vec<u32>,
    ) -> Result<Self> {
        if node_feat.len() != num_nodes {
            return Err(Error::contract(format!(
                "{} node features for {num_nodes} nodes",
                node_feat.len()
            )));
        }
        if edge_feat.len() != edges.len() {
            return Err(Error::contract(format!(
                "{} edge features for {} edges",
                edge_feat.len(),
                edges.len()
            )));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut norm = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::contract(format!("edge ({u},{v}) out of range for {num_nodes} nodes")));
            }
            if u == v {
                return Err(Error::contract(format!("self-loop on node {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::contract(format!("duplicate edge ({},{})", e.0, e.1)));
            }
            norm.push(e);
        }
        Ok(Self { num_nodes, edges: norm, node_feat, edge_feat })
    }

    /// Unlabelled graph: every node and edge feature is 0.
    pub fn unlabeled(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let m = edges.len();
        Self::new(num_nodes, edges, vec![0; num_nodes], vec![0; m])
    }

    pub fn path(n: usize) -> Self {
        Self::unlabeled(n, (1..n).map(|i| (i - 1, i)).collect()).expect("path is simple")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        Self::unlabeled(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).expect("cycle is simple")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::unlabeled(n, edges).expect("complete graph is simple")
    }

    /// G(n, p) random graph with all features 0.
    pub fn random<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        Self::unlabeled(n, edges).expect("random graph is simple")
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node_feat(&self) -> &[u32] {
        &self.node_feat
    }

    pub fn edge_feat(&self) -> &[u32] {
        &self.edge_feat
    }

    pub fn with_node_feat(mut self, node_feat: Vec<u32>) -> Result<Self> {
        if node_feat.len() != self.num_nodes {
            return Err(Error::contract("node feature length mismatch"));
        }
        self.node_feat = node_feat;
        Ok(self)
    }

    /// Neighbour lists, each sorted ascending.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let e = (u.min(v), u.max(v));
        self.edges.contains(&e)
    }

    pub fn dense_adjacency<F: Scalar>(&self) -> Matrix<F> {
        let mut a = Matrix::zeros(self.num_nodes, self.num_nodes);
        for &(u, v) in &self.edges {
            a[(u, v)] = F::one();
            a[(v, u)] = F::one();
        }
        a
    }

    /// Relabel nodes: old node `v` becomes `perm[v]`. Edge order and edge
    /// features are kept.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.num_nodes, "permutation length");
        let mut node_feat = vec![0; self.num_nodes];
        for (v, &f) in self.node_feat.iter().enumerate() {
            node_feat[perm[v]] = f;
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Self::new(self.num_nodes, edges, node_feat, self.edge_feat.clone())
            .expect("relabelling preserves simplicity")
    }
}

/// All-pairs hop distances. Unreachable pairs hold the sentinel
/// `num_nodes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpdMatrix {
    n: usize,
    dist: Vec<u32>,
}

impl SpdMatrix {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> u32 {
        self.dist[u * self.n + v]
    }

    pub fn unreachable(&self) -> u32 {
        self.n as u32
    }

    pub fn row(&self, u: usize) -> &[u32] {
        &self.dist[u * self.n..(u + 1) * self.n]
    }
}

/// BFS from every node.
pub fn all_pairs_spd(g: &Graph) -> SpdMatrix {
    let n = g.num_nodes();
    let adj = g.adjacency_lists();
    let mut dist = vec![n as u32; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        row[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if row[w] == n as u32 {
                    row[w] = row[u] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    SpdMatrix { n, dist }
}

/// `I - D^{-1/2} A D^{-1/2}`; an isolated node keeps diagonal 1 and a zero
/// row otherwise.
pub fn normalized_laplacian<F: Scalar>(g: &Graph) -> Matrix<F> {
    let n = g.num_nodes();
    let deg = g.degrees();
    let mut l = Matrix::<F>::identity(n);
    for &(u, v) in g.edges() {
        let w = -F::one() / (F::of_usize(deg[u]) * F::of_usize(deg[v])).sqrt();
        l[(u, v)] = w;
        l[(v, u)] = w;
    }
    l
}
