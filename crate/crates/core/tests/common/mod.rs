#![allow(dead_code)]

use csgnn::{CoarsePartition, Graph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_perm(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Random graph with node labels in `0..3` and edge labels in `0..2`.
pub fn labeled_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let shape = Graph::random(n, p, rng);
    let nf = (0..n).map(|_| rng.gen_range(0..3)).collect();
    let ef = (0..shape.num_edges()).map(|_| rng.gen_range(0..2)).collect();
    Graph::new(n, shape.edges().to_vec(), nf, ef).unwrap()
}

/// Random partition of the nodes into at most `max_parts` non-empty parts.
pub fn random_partition(g: &Graph, max_parts: usize, rng: &mut impl Rng) -> CoarsePartition {
    let n = g.num_nodes();
    let k = rng.gen_range(1..=max_parts.min(n));
    let mut parts = vec![Vec::new(); k];
    let perm = random_perm(n, rng);
    for (i, &v) in perm.iter().enumerate() {
        let p = if i < k { i } else { rng.gen_range(0..k) };
        parts[p].push(v);
    }
    CoarsePartition::from_supers(g, parts).unwrap()
}

/// Random family of non-empty subsets, not necessarily a partition.
pub fn random_cover(g: &Graph, max_sets: usize, rng: &mut impl Rng) -> CoarsePartition {
    let n = g.num_nodes();
    let k = rng.gen_range(1..=max_sets.min((1 << n) - 1));
    let mut sets = Vec::new();
    while sets.len() < k {
        let s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        if !s.is_empty() && !sets.contains(&s) {
            sets.push(s);
        }
    }
    CoarsePartition::from_supers(g, sets).unwrap()
}
