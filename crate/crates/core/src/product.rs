//! The coarse product graph: nodes are `(super-node, node)` pairs, flattened
//! as `super_idx * n + node`, connected by four kinds of arcs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::coarsen::CoarsePartition;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::symmetry::{classify_quad, orbit_table, QuadOrbit};

/// Directed arcs `src -> dst` with one categorical feature each, sorted by
/// `(dst, src)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub feat: Vec<u32>,
}

impl Adjacency {
    fn from_arcs(mut arcs: Vec<(usize, usize, u32)>) -> Self {
        arcs.sort_by_key(|&(s, d, _)| (d, s));
        let mut adj = Adjacency::default();
        for (s, d, f) in arcs {
            adj.src.push(s);
            adj.dst.push(d);
            adj.feat.push(f);
        }
        adj
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.len()).map(|k| (self.src[k], self.dst[k], self.feat[k]))
    }

    pub fn arc_set(&self) -> BTreeSet<(usize, usize)> {
        self.src.iter().copied().zip(self.dst.iter().copied()).collect()
    }
}

/// Which of the four adjacencies an arc belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    /// same super-node, neighbouring nodes
    Graph,
    /// same node, neighbouring super-nodes
    Coarse,
    /// same node, source super-node contains it
    PointCol,
    /// same super-node, source node belongs to it
    PointRow,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::Graph, Branch::Coarse, Branch::PointCol, Branch::PointRow];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductGraph {
    num_supers: usize,
    num_nodes: usize,
    supers: Vec<Vec<usize>>,
    adj_g: Adjacency,
    adj_tg: Adjacency,
    adj_p1: Adjacency,
    adj_p2: Adjacency,
    orbits_p1: Vec<QuadOrbit>,
    orbits_p2: Vec<QuadOrbit>,
}

impl ProductGraph {
    pub fn num_supers(&self) -> usize {
        self.num_supers
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_pg_nodes(&self) -> usize {
        self.num_supers * self.num_nodes
    }

    pub fn index(&self, s: usize, v: usize) -> usize {
        s * self.num_nodes + v
    }

    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.num_nodes, idx % self.num_nodes)
    }

    pub fn supers(&self) -> &[Vec<usize>] {
        &self.supers
    }

    pub fn adjacency(&self, b: Branch) -> &Adjacency {
        match b {
            Branch::Graph => &self.adj_g,
            Branch::Coarse => &self.adj_tg,
            Branch::PointCol => &self.adj_p1,
            Branch::PointRow => &self.adj_p2,
        }
    }

    /// Orbit of every arc of a pointwise adjacency, aligned with its arcs.
    /// Empty for the other two branches.
    pub fn orbits(&self, b: Branch) -> &[QuadOrbit] {
        match b {
            Branch::PointCol => &self.orbits_p1,
            Branch::PointRow => &self.orbits_p2,
            _ => &[],
        }
    }

    /// Super-node index of every product node.
    pub fn super_of_rows(&self) -> Vec<usize> {
        (0..self.num_pg_nodes()).map(|i| i / self.num_nodes).collect()
    }

    /// Dense 0/1 matrix of the union of the graph and coarse arcs.
    pub fn connectivity_dense<F: Scalar>(&self) -> Matrix<F> {
        let m = self.num_pg_nodes();
        let mut a = Matrix::zeros(m, m);
        for adj in [&self.adj_g, &self.adj_tg] {
            for (s, d, _) in adj.arcs() {
                a[(s, d)] = F::one();
            }
        }
        a
    }
}

/// Builds all four adjacencies. Arcs of the pointwise branches carry the
/// orbit code of `(target super, target node, source super, source node)`
/// in the full orbit table for `n`.
pub fn build_product(g: &Graph, cp: &CoarsePartition) -> Result<ProductGraph> {
    let n = g.num_nodes();
    if cp.source_n() != n {
        return Err(Error::contract(format!(
            "coarsening built for {} nodes applied to a graph with {n}",
            cp.source_n()
        )));
    }
    let t = cp.num_supers();
    let idx = |s: usize, v: usize| s * n + v;
    let supers = cp.super_nodes().to_vec();

    let mut arcs_g = Vec::with_capacity(2 * t * g.num_edges());
    for s in 0..t {
        for (&(u, v), &f) in g.edges().iter().zip(g.edge_feat()) {
            arcs_g.push((idx(s, u), idx(s, v), f));
            arcs_g.push((idx(s, v), idx(s, u), f));
        }
    }

    let mut arcs_tg = Vec::with_capacity(2 * n * cp.coarse_edges().len());
    for &(a, b) in cp.coarse_edges() {
        for v in 0..n {
            arcs_tg.push((idx(a, v), idx(b, v), 0));
            arcs_tg.push((idx(b, v), idx(a, v), 0));
        }
    }

    let table = orbit_table(n);
    let code = |o: &QuadOrbit| table.code(o).expect("classified orbits are realisable").0;
    let memberships = cp.memberships();

    // (S', v) with v in S'  ->  (S, v) for every S
    let mut p1 = Vec::new();
    for v in 0..n {
        for &src_s in &memberships[v] {
            for dst_s in 0..t {
                let o = classify_quad(&supers[dst_s], v, &supers[src_s], v);
                p1.push(((idx(src_s, v), idx(dst_s, v), code(&o)), o));
            }
        }
    }
    // (S, v') with v' in S  ->  (S, v) for every v
    let mut p2 = Vec::new();
    for (s, members) in supers.iter().enumerate() {
        for &src_v in members {
            for v in 0..n {
                let o = classify_quad(members, v, members, src_v);
                p2.push(((idx(s, src_v), idx(s, v), code(&o)), o));
            }
        }
    }
    p1.sort_by_key(|&((s, d, _), _)| (d, s));
    p2.sort_by_key(|&((s, d, _), _)| (d, s));
    let (arcs_p1, orbits_p1): (Vec<_>, Vec<_>) = p1.into_iter().unzip();
    let (arcs_p2, orbits_p2): (Vec<_>, Vec<_>) = p2.into_iter().unzip();

    Ok(ProductGraph {
        num_supers: t,
        num_nodes: n,
        supers,
        adj_g: Adjacency::from_arcs(arcs_g),
        adj_tg: Adjacency::from_arcs(arcs_tg),
        adj_p1: Adjacency::from_arcs(arcs_p1),
        adj_p2: Adjacency::from_arcs(arcs_p2),
        orbits_p1,
        orbits_p2,
    })
}

/// Dense Cartesian product adjacency `A1 ⊗ I + I ⊗ A2`; row `(i1, i2)` sits
/// at `i1 * n2 + i2`.
pub fn kron_oracle<F: Scalar>(a1: &Matrix<F>, a2: &Matrix<F>) -> Matrix<F> {
    let (n1, n2) = (a1.rows(), a2.rows());
    assert_eq!(n1, a1.cols(), "first factor must be square");
    assert_eq!(n2, a2.cols(), "second factor must be square");
    let mut out = Matrix::zeros(n1 * n2, n1 * n2);
    for i1 in 0..n1 {
        for j1 in 0..n1 {
            for i2 in 0..n2 {
                for j2 in 0..n2 {
                    let mut x = F::zero();
                    if i2 == j2 {
                        x = x + a1[(i1, j1)];
                    }
                    if i1 == j1 {
                        x = x + a2[(i2, j2)];
                    }
                    out[(i1 * n2 + i2, j1 * n2 + j2)] = x;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::{identity_coarsen, single_coarsen};

    #[test]
    fn k2_box_k2_is_c4() {
        let a = Matrix::<f64>::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let k = kron_oracle(&a, &a);
        let c4 = Graph::cycle(4).dense_adjacency::<f64>();
        // (0,0) (0,1) (1,0) (1,1) around the square is 0,1,3,2
        let order = [0, 1, 3, 2];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(k[(order[i], order[j])], c4[(i, j)]);
            }
        }
    }

    #[test]
    fn trivial_first_factor() {
        let a2 = Graph::path(3).dense_adjacency::<f64>();
        assert_eq!(kron_oracle(&Matrix::zeros(1, 1), &a2), a2);
    }

    #[test]
    fn single_super_node_copies_graph() {
        let g = Graph::cycle(5);
        let pg = build_product(&g, &single_coarsen(&g).unwrap()).unwrap();
        assert!(pg.adjacency(Branch::Coarse).is_empty());
        assert_eq!(pg.adjacency(Branch::Graph).len(), 2 * g.num_edges());
        assert_eq!(pg.num_pg_nodes(), 5);
    }

    #[test]
    fn edge_counts() {
        let g = Graph::cycle(4);
        let cp = identity_coarsen(&g);
        let pg = build_product(&g, &cp).unwrap();
        assert_eq!(pg.adjacency(Branch::Graph).len() / 2, cp.num_supers() * g.num_edges());
        assert_eq!(pg.adjacency(Branch::Coarse).len() / 2, 4 * cp.coarse_edges().len());
        // singletons: each node is in exactly one super-node
        assert_eq!(pg.adjacency(Branch::PointCol).len(), 4 * 4);
        assert_eq!(pg.adjacency(Branch::PointRow).len(), 4 * 4);
        assert_eq!(pg.orbits(Branch::PointRow).len(), 16);
    }

    #[test]
    fn pointwise_arcs_include_self_messages() {
        let g = Graph::path(3);
        let pg = build_product(&g, &identity_coarsen(&g)).unwrap();
        for b in [Branch::PointCol, Branch::PointRow] {
            let arcs = pg.adjacency(b).arc_set();
            for v in 0..3 {
                let i = pg.index(v, v);
                assert!(arcs.contains(&(i, i)));
            }
        }
    }

    #[test]
    fn rejects_mismatched_coarsening() {
        let cp = identity_coarsen(&Graph::path(3));
        assert!(build_product(&Graph::path(4), &cp).is_err());
    }
}
