mod common;

use common::{labeled_graph, random_cover, random_partition, random_perm, rng};
use csgnn::coarsen::{degree3_coarsen, identity_coarsen, node_plus_edge_coarsen};
use csgnn::marking::{mark, Mark};
use csgnn::symmetry::{
    brute_force_orbits, mask_members, orbit_table, pair_basis_tensor, pair_orbits, quad_basis_tensor, OracleMode,
};
use csgnn::wl::{
    build_sum_graph, product_wl_separation, sum_graph_separation, two_pentagons_glued, two_squares_bridged,
    wl_equivalent, wl_refine_joint, MarkReadout, TypedGraph,
};
use csgnn::{
    all_pairs_spd, classify_pair, classify_quad, CoarseningSpec, Graph, MarkingKind, MarkingSpec, OrbitTable,
};
use rand::Rng;

#[test]
fn classifiers_match_oracle_up_to_four_nodes() {
    for n in 2..=4 {
        let pairs = brute_force_orbits(n, OracleMode::Pair, 1..=n).unwrap();
        assert!(pairs.pair_classifier_agrees(), "pairs n = {n}");
        let quads = brute_force_orbits(n, OracleMode::Quad, 1..=n.min(3)).unwrap();
        assert!(quads.quad_classifier_agrees(), "quads n = {n}");
    }
}

#[test]
fn classifiers_are_invariant_under_sampled_permutations() {
    let mut r = rng(17);
    for n in 6..=7 {
        for _ in 0..2000 {
            let mask1: u32 = r.gen_range(1..(1 << n));
            let mask2: u32 = r.gen_range(1..(1 << n));
            let (s1, s2) = (mask_members(mask1), mask_members(mask2));
            let (i1, i2) = (r.gen_range(0..n), r.gen_range(0..n));
            let p = random_perm(n, &mut r);
            let map = |s: &[usize]| s.iter().map(|&v| p[v]).collect::<Vec<_>>();
            assert_eq!(classify_pair(&s1, i1), classify_pair(&map(&s1), p[i1]));
            assert_eq!(classify_quad(&s1, i1, &s2, i2), classify_quad(&map(&s1), p[i1], &map(&s2), p[i2]));
        }
    }
}

#[test]
fn orbit_codes_are_a_deterministic_bijection() {
    for n in 1..=6 {
        let a = OrbitTable::new(n);
        let b = OrbitTable::new(n);
        assert_eq!(a.orbits(), b.orbits());
        for (c, o) in a.orbits().iter().enumerate() {
            assert_eq!(a.code(o).unwrap().0 as usize, c);
            assert!(o.is_realizable(n));
            let (s1, i1, s2, i2) = o.witness(n).unwrap();
            assert_eq!(classify_quad(&s1, i1, &s2, i2), *o);
        }
    }
    // every tuple over [4] lands on a code
    let t = orbit_table(4);
    let mut seen = vec![false; t.len()];
    for m1 in 1u32..16 {
        for m2 in 1u32..16 {
            for i1 in 0..4 {
                for i2 in 0..4 {
                    let o = classify_quad(&mask_members(m1), i1, &mask_members(m2), i2);
                    seen[t.code(&o).unwrap().0 as usize] = true;
                }
            }
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn basis_tensors_partition_unity_and_are_orthogonal() {
    let n = 3;
    let pair: Vec<Vec<f64>> = pair_orbits(n).into_iter().map(|o| pair_basis_tensor(o, n).unwrap()).collect();
    for i in 0..pair[0].len() {
        assert_eq!(pair.iter().map(|t| t[i]).sum::<f64>(), 1.0);
    }
    let quads: Vec<_> = OrbitTable::new(n).orbits().iter().map(|&o| quad_basis_tensor(o, n).unwrap()).collect();
    let dim = quads[0].rows();
    for r in 0..dim {
        for c in 0..dim {
            assert_eq!(quads.iter().map(|t| t[(r, c)]).sum::<f64>(), 1.0);
        }
    }
    for a in 0..quads.len() {
        for b in a + 1..quads.len() {
            let dot: f64 = quads[a].data().iter().zip(quads[b].data()).map(|(x, y)| x * y).sum();
            assert_eq!(dot, 0.0);
        }
    }
}

fn marks(g: &Graph, cp: &csgnn::CoarsePartition, kind: MarkingKind, spd_dim: Option<usize>) -> Vec<Mark> {
    mark(cp, MarkingSpec::new(kind, spd_dim).unwrap(), &all_pairs_spd(g)).unwrap()
}

#[test]
fn marking_policies_are_mutually_derivable() {
    let mut r = rng(5);
    for _ in 0..100 {
        let n = r.gen_range(2..9);
        let g = labeled_graph(n, 0.35, &mut r);
        let cp = random_cover(&g, 4, &mut r);
        let simple = marks(&g, &cp, MarkingKind::Simple, None);
        let sized = marks(&g, &cp, MarkingKind::NodeSize, None);
        let min = marks(&g, &cp, MarkingKind::MinDistance, None);
        let max_s = cp.super_nodes().iter().map(Vec::len).max().unwrap();
        let ld = marks(&g, &cp, MarkingKind::LearnedDistance, Some(max_s));
        for (s, _) in cp.super_nodes().iter().enumerate() {
            let count = (0..n).filter(|&v| simple[s * n + v] == Mark::Simple(true)).count();
            for v in 0..n {
                let i = s * n + v;
                let Mark::Simple(bit) = simple[i] else { panic!() };
                assert_eq!(sized[i], Mark::NodeSize { member: bit, size: count });
                assert_eq!(min[i] == Mark::MinDistance(0), bit);
                let Mark::Distances(ds) = &ld[i] else { panic!() };
                assert_eq!(Mark::MinDistance(*ds.iter().min().unwrap()), min[i]);
            }
        }
    }
}

#[test]
fn markings_are_permutation_equivariant() {
    let mut r = rng(8);
    for _ in 0..50 {
        let n = r.gen_range(2..9);
        let g = labeled_graph(n, 0.4, &mut r);
        let cp = random_partition(&g, 3, &mut r);
        let p = random_perm(n, &mut r);
        let (h, cq) = (g.permute(&p), cp.permute_nodes(&p));
        for kind in [MarkingKind::Simple, MarkingKind::NodeSize, MarkingKind::MinDistance, MarkingKind::LearnedDistance] {
            let a = marks(&g, &cp, kind, Some(2));
            let b = marks(&h, &cq, kind, Some(2));
            for s in 0..cp.num_supers() {
                for v in 0..n {
                    assert_eq!(a[s * n + v], b[s * n + p[v]], "{kind}");
                }
            }
        }
    }
}

fn relabelled(t: &TypedGraph, arcs: &[(usize, usize, u64)], p: &[usize]) -> TypedGraph {
    let mut colors = vec![0; t.num_nodes()];
    for (v, &c) in t.colors().iter().enumerate() {
        colors[p[v]] = c;
    }
    let mut out = TypedGraph::new(colors);
    for &(s, d, l) in arcs.iter().rev() {
        out.add_arc(p[s], p[d], l);
    }
    out
}

#[test]
fn wl_is_isomorphism_invariant() {
    let mut r = rng(99);
    for _ in 0..100 {
        let n = r.gen_range(1..12);
        let g = labeled_graph(n, 0.3, &mut r);
        let p = random_perm(n, &mut r);
        assert!(wl_equivalent(&TypedGraph::from_graph(&g), &TypedGraph::from_graph(&g.permute(&p))));
        let t = TypedGraph::from_graph(&g);
        let arcs: Vec<_> = g.edges().iter().zip(g.edge_feat()).flat_map(|(&(u, v), &f)| [(u, v, f as u64), (v, u, f as u64)]).collect();
        assert!(wl_equivalent(&t, &relabelled(&t, &arcs, &p)));
    }
}

#[test]
fn wl_class_counts_grow_and_stabilise() {
    let mut r = rng(4);
    for _ in 0..30 {
        let n = r.gen_range(2..10);
        let t = TypedGraph::from_graph(&Graph::random(n, 0.3, &mut r));
        let out = wl_refine_joint(&[&t], n);
        assert!(out.class_counts.windows(2).all(|w| w[0] <= w[1]));
        assert!(out.class_counts.len() <= n + 1);
    }
}

#[test]
fn sum_graph_of_single_super_node_on_k2() {
    let g = Graph::complete(2);
    let cp = csgnn::CoarsePartition::from_supers(&g, vec![vec![0, 1]]).unwrap();
    let t = build_sum_graph(&g, &cp);
    assert_eq!(t.num_nodes(), 3);
    assert_eq!(t.num_arcs(), 6);
}

#[test]
fn product_wl_refines_sum_graph_wl() {
    let mut r = rng(21);
    let mut pairs: Vec<(Graph, Graph)> = vec![(two_squares_bridged(), two_pentagons_glued())];
    for _ in 0..60 {
        let n = r.gen_range(3..8);
        pairs.push((Graph::random(n, 0.4, &mut r), Graph::random(n, 0.4, &mut r)));
    }
    let mut separated_by_sum = 0;
    for (a, b) in &pairs {
        for spec in [CoarseningSpec::Identity, CoarseningSpec::NodePlusEdge, CoarseningSpec::Degree3] {
            if spec == CoarseningSpec::Degree3 && (degree3_coarsen(a).is_err() || degree3_coarsen(b).is_err()) {
                continue;
            }
            if sum_graph_separation(a, b, spec, 0).unwrap() {
                separated_by_sum += 1;
                let p = product_wl_separation(a, b, spec, MarkingSpec::simple(), MarkReadout::Full, 0).unwrap();
                assert!(p.separated, "{spec}: {a:?} vs {b:?}");
            }
        }
    }
    assert!(separated_by_sum > 20);
}

#[test]
fn identical_graphs_are_not_separated() {
    let g = two_squares_bridged();
    let rep = product_wl_separation(
        &g,
        &g,
        CoarseningSpec::Degree3,
        MarkingSpec { kind: MarkingKind::LearnedDistance, spd_dim: None },
        MarkReadout::Max,
        0,
    )
    .unwrap();
    assert!(!rep.separated);
    assert_eq!(rep.mark_sums.0, rep.mark_sums.1);
}

#[test]
fn identity_sum_graph_is_graph_with_pendant_twins() {
    let g = Graph::path(4);
    let t = build_sum_graph(&g, &identity_coarsen(&g));
    assert_eq!(t.num_nodes(), 8);
    // graph edges, coarse copies of them, and one membership edge per node
    assert_eq!(t.num_arcs(), 2 * (3 + 3 + 4));
    let nodes_only = node_plus_edge_coarsen(&g);
    assert_eq!(nodes_only.num_supers(), 4 + 3);
}
