//! 1-WL colour refinement on typed graphs with labelled arcs, the coarsened
//! sum graph, and the separation experiments built on them.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use crate::coarsen::{CoarsePartition, CoarseningSpec};
use crate::error::Result;
use crate::graph::{all_pairs_spd, Graph};
use crate::marking::{mark, Mark, MarkingKind, MarkingSpec};
use crate::product::{build_product, Branch, ProductGraph};
use crate::symmetry::QuadOrbit;

/// Node-coloured graph with labelled directed arcs. Undirected edges are a
/// pair of opposite arcs with the same label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypedGraph {
    colors: Vec<u64>,
    arcs: Vec<(usize, usize, u64)>,
}

impl TypedGraph {
    pub fn new(colors: Vec<u64>) -> Self {
        Self { colors, arcs: Vec::new() }
    }

    pub fn add_arc(&mut self, src: usize, dst: usize, label: u64) {
        self.arcs.push((src, dst, label));
    }

    pub fn add_edge(&mut self, u: usize, v: usize, label: u64) {
        self.add_arc(u, v, label);
        self.add_arc(v, u, label);
    }

    pub fn num_nodes(&self) -> usize {
        self.colors.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn colors(&self) -> &[u64] {
        &self.colors
    }

    /// Unlabelled typed graph with uniform colour, or coloured by node
    /// features.
    pub fn from_graph(g: &Graph) -> Self {
        let mut t = Self::new(g.node_feat().iter().map(|&f| f as u64).collect());
        for (&(u, v), &f) in g.edges().iter().zip(g.edge_feat()) {
            t.add_edge(u, v, f as u64);
        }
        t
    }
}

/// Colour class -> number of nodes with that colour.
pub type Histogram = BTreeMap<u64, usize>;

#[derive(Clone, Debug)]
pub struct WlOutcome {
    pub histograms: Vec<Histogram>,
    /// Number of distinct colours over all graphs, before refinement and
    /// after every round.
    pub class_counts: Vec<usize>,
}

type Signature = (u64, Vec<(u64, u64)>);

/// Refines all graphs together so colour ids are comparable between them.
///
/// Each round a node's new colour is the rank of `(old colour, sorted
/// multiset of (arc label, source colour) over incoming arcs)` among all
/// signatures seen in that round. Stops when the number of classes no
/// longer grows, or after `max_rounds`.
pub fn wl_refine_joint(graphs: &[&TypedGraph], max_rounds: usize) -> WlOutcome {
    let mut colors: Vec<Vec<u64>> = graphs.iter().map(|g| g.colors.clone()).collect();
    let incoming: Vec<Vec<Vec<(usize, u64)>>> = graphs
        .iter()
        .map(|g| {
            let mut inc = vec![Vec::new(); g.num_nodes()];
            for &(s, d, l) in &g.arcs {
                inc[d].push((s, l));
            }
            inc
        })
        .collect();
    let count = |cs: &[Vec<u64>]| {
        let mut all: Vec<u64> = cs.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    };
    let mut class_counts = vec![count(&colors)];
    for _ in 0..max_rounds {
        let sigs: Vec<Vec<Signature>> = colors
            .iter()
            .zip(&incoming)
            .map(|(cs, inc)| {
                (0..cs.len())
                    .map(|v| {
                        let mut nb: Vec<(u64, u64)> = inc[v].iter().map(|&(s, l)| (l, cs[s])).collect();
                        nb.sort_unstable();
                        (cs[v], nb)
                    })
                    .collect()
            })
            .collect();
        let mut ranks: BTreeMap<&Signature, u64> = BTreeMap::new();
        for s in sigs.iter().flatten() {
            ranks.insert(s, 0);
        }
        for (r, v) in ranks.values_mut().enumerate() {
            *v = r as u64;
        }
        let next: Vec<Vec<u64>> =
            sigs.iter().map(|gs| gs.iter().map(|s| ranks[s]).collect()).collect();
        let prev = *class_counts.last().expect("non-empty");
        colors = next;
        let now = count(&colors);
        class_counts.push(now);
        if now == prev {
            break;
        }
    }
    let histograms = colors
        .iter()
        .map(|cs| {
            let mut h = Histogram::new();
            for &c in cs {
                *h.entry(c).or_insert(0) += 1;
            }
            h
        })
        .collect();
    WlOutcome { histograms, class_counts }
}

/// Stable colour histogram of a single graph.
pub fn wl_refine(g: &TypedGraph, rounds: usize) -> Histogram {
    wl_refine_joint(&[g], rounds).histograms.pop().expect("one graph in, one out")
}

/// True when 1-WL cannot tell the two graphs apart.
pub fn wl_equivalent(a: &TypedGraph, b: &TypedGraph) -> bool {
    let rounds = a.num_nodes() + b.num_nodes() + 1;
    let out = wl_refine_joint(&[a, b], rounds);
    out.histograms[0] == out.histograms[1]
}

/// Assigns dense ids to keys in order of first appearance.
#[derive(Debug)]
pub struct Interner<K> {
    ids: HashMap<K, u64>,
}

impl<K: Eq + Hash + Clone> Default for Interner<K> {
    fn default() -> Self {
        Self { ids: HashMap::new() }
    }
}

impl<K: Eq + Hash + Clone> Interner<K> {
    pub fn intern(&mut self, key: &K) -> u64 {
        let next = self.ids.len() as u64;
        *self.ids.entry(key.clone()).or_insert(next)
    }
}

const LABEL_GRAPH: u64 = 0;
const LABEL_COARSE: u64 = 1 << 32;
const LABEL_MEMBER: u64 = 2 << 32;

/// Joins `V` and the super-nodes: original edges, coarse edges and one
/// membership edge per `(S, v)` with `v ∈ S`, each class with its own
/// label. Originals are coloured `2 * feat + 1`, super-nodes `0`.
pub fn build_sum_graph(g: &Graph, cp: &CoarsePartition) -> TypedGraph {
    let n = g.num_nodes();
    let mut colors: Vec<u64> = g.node_feat().iter().map(|&f| 2 * f as u64 + 1).collect();
    colors.extend(std::iter::repeat_n(0, cp.num_supers()));
    let mut t = TypedGraph::new(colors);
    for (&(u, v), &f) in g.edges().iter().zip(g.edge_feat()) {
        t.add_edge(u, v, LABEL_GRAPH | f as u64);
    }
    for &(a, b) in cp.coarse_edges() {
        t.add_edge(n + a, n + b, LABEL_COARSE);
    }
    for (s, members) in cp.super_nodes().iter().enumerate() {
        for &v in members {
            t.add_edge(n + s, v, LABEL_MEMBER);
        }
    }
    t
}

/// How a product node's mark is turned into a colour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkReadout {
    /// The whole descriptor.
    Full,
    /// Largest distance in the learned-distance multiset.
    Max,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum NodeKey {
    Full(u32, Mark),
    Value(u32, u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum ArcKey {
    Graph(u32),
    Coarse(u32),
    PointCol(QuadOrbit),
    PointRow(QuadOrbit),
}

/// Scalar summary of a mark: membership bit, distance, or the chosen
/// reduction of the distance multiset.
pub fn mark_value(m: &Mark, readout: MarkReadout) -> u64 {
    match m {
        Mark::Simple(b) => *b as u64,
        Mark::NodeSize { member, .. } => *member as u64,
        Mark::MinDistance(d) => *d as u64,
        Mark::Distances(ds) => match readout {
            MarkReadout::Max => ds.last().copied().unwrap_or(0) as u64,
            MarkReadout::Full => ds.iter().map(|&d| d as u64).sum(),
        },
    }
}

/// Shared interners so two product graphs get comparable colours.
#[derive(Debug, Default)]
pub struct ProductColoring {
    nodes: Interner<NodeKey>,
    arcs: Interner<ArcKey>,
}

impl ProductColoring {
    /// Product graph as a typed graph: nodes coloured by `(node feature,
    /// mark)`, arcs labelled by branch plus edge feature or orbit.
    pub fn typed_graph(
        &mut self,
        g: &Graph,
        pg: &ProductGraph,
        marks: &[Mark],
        readout: MarkReadout,
        use_pointwise: bool,
    ) -> TypedGraph {
        let n = pg.num_nodes();
        let colors = (0..pg.num_pg_nodes())
            .map(|i| {
                let feat = g.node_feat()[i % n];
                let key = match readout {
                    MarkReadout::Full => NodeKey::Full(feat, marks[i].clone()),
                    MarkReadout::Max => NodeKey::Value(feat, mark_value(&marks[i], readout)),
                };
                self.nodes.intern(&key)
            })
            .collect();
        let mut t = TypedGraph::new(colors);
        let mut branches = vec![Branch::Graph, Branch::Coarse];
        if use_pointwise {
            branches.extend([Branch::PointCol, Branch::PointRow]);
        }
        for b in branches {
            let adj = pg.adjacency(b);
            let orbits = pg.orbits(b);
            for (k, (s, d, f)) in adj.arcs().enumerate() {
                let key = match b {
                    Branch::Graph => ArcKey::Graph(f),
                    Branch::Coarse => ArcKey::Coarse(f),
                    Branch::PointCol => ArcKey::PointCol(orbits[k]),
                    Branch::PointRow => ArcKey::PointRow(orbits[k]),
                };
                let label = self.arcs.intern(&key);
                t.add_arc(s, d, label);
            }
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparationReport {
    pub separated: bool,
    /// `Σ_{S,v}` of the mark readout on each graph.
    pub mark_sums: (u64, u64),
}

/// Product-graph WL on two graphs under the same coarsening and marking.
pub fn product_wl_separation(
    g1: &Graph,
    g2: &Graph,
    coarsening: CoarseningSpec,
    marking: MarkingSpec,
    readout: MarkReadout,
    seed: u64,
) -> Result<SeparationReport> {
    let mut coloring = ProductColoring::default();
    let mut typed = Vec::new();
    let mut sums = Vec::new();
    for g in [g1, g2] {
        let cp = coarsening.apply(g, seed)?;
        let pg = build_product(g, &cp)?;
        let marks = mark(&cp, marking, &all_pairs_spd(g))?;
        sums.push(marks.iter().map(|m| mark_value(m, readout)).sum::<u64>());
        typed.push(coloring.typed_graph(g, &pg, &marks, readout, true));
    }
    Ok(SeparationReport { separated: !wl_equivalent(&typed[0], &typed[1]), mark_sums: (sums[0], sums[1]) })
}

/// Sum-graph WL on two graphs under the same coarsening.
pub fn sum_graph_separation(g1: &Graph, g2: &Graph, coarsening: CoarseningSpec, seed: u64) -> Result<bool> {
    let a = build_sum_graph(g1, &coarsening.apply(g1, seed)?);
    let b = build_sum_graph(g2, &coarsening.apply(g2, seed)?);
    Ok(!wl_equivalent(&a, &b))
}

/// Two 4-cycles joined by an edge between one node of each.
pub fn two_squares_bridged() -> Graph {
    Graph::unlabeled(8, vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4)])
        .expect("valid graph")
}

/// Two 5-cycles sharing the edge `0 - 1`.
pub fn two_pentagons_glued() -> Graph {
    Graph::unlabeled(8, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 5), (5, 6), (6, 7), (7, 0)])
        .expect("valid graph")
}

/// Outcome of the full separation experiment on the bridged-squares /
/// glued-pentagons pair under the degree-3 coarsening.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeThreeExperiment {
    pub raw_separated: bool,
    pub sum_graph_separated: bool,
    pub simple_marking: SeparationReport,
    pub learned_distance_max: SeparationReport,
}

pub fn degree_three_experiment() -> Result<DegreeThreeExperiment> {
    let (g, h) = (two_squares_bridged(), two_pentagons_glued());
    let raw_separated = !wl_equivalent(&TypedGraph::from_graph(&g), &TypedGraph::from_graph(&h));
    let sum_graph_separated = sum_graph_separation(&g, &h, CoarseningSpec::Degree3, 0)?;
    let simple_marking =
        product_wl_separation(&g, &h, CoarseningSpec::Degree3, MarkingSpec::simple(), MarkReadout::Full, 0)?;
    let learned_distance_max = product_wl_separation(
        &g,
        &h,
        CoarseningSpec::Degree3,
        MarkingSpec { kind: MarkingKind::LearnedDistance, spd_dim: None },
        MarkReadout::Max,
        0,
    )?;
    Ok(DegreeThreeExperiment { raw_separated, sum_graph_separated, simple_marking, learned_distance_max })
}
