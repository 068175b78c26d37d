//! The CS-GNN model: input encoding on the product graph, GINE-style
//! branches over the four adjacencies, and two-stage pooling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::coarsen::CoarseningSpec;
use crate::error::{Error, Result};
use crate::graph::{all_pairs_spd, Graph};
use crate::linalg::Matrix;
use crate::marking::{mark, Mark, MarkingKind, MarkingSpec};
use crate::params::{ParamId, ParamStore};
use crate::product::{build_product, Branch, ProductGraph};
use crate::scalar::Scalar;
use crate::symmetry::{OrbitTable, QuadOrbit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// `MLP(Σ_S MLP(Σ_v X))`
    TwoMlp,
    /// `MLP(Σ_S mean_v X)`
    MeanSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub marking: MarkingSpec,
    pub coarsening: CoarseningSpec,
    pub use_equiv_updates: bool,
    pub pooling: Pooling,
    pub residual: bool,
    pub seed: u64,
    /// Largest graph the embedding tables are sized for.
    pub max_nodes: usize,
    pub node_vocab: usize,
    pub edge_vocab: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 3,
            hidden_dim: 32,
            marking: MarkingSpec { kind: MarkingKind::LearnedDistance, spd_dim: Some(10) },
            coarsening: CoarseningSpec::Spectral { clusters: 2, lap_dim: 1 },
            use_equiv_updates: true,
            pooling: Pooling::TwoMlp,
            residual: false,
            seed: 0,
            max_nodes: 16,
            node_vocab: 1,
            edge_vocab: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("num_layers", self.num_layers),
            ("hidden_dim", self.hidden_dim),
            ("max_nodes", self.max_nodes),
            ("node_vocab", self.node_vocab),
            ("edge_vocab", self.edge_vocab),
        ] {
            if v == 0 {
                return Err(Error::contract(format!("{name} must be at least 1")));
            }
        }
        if let CoarseningSpec::Spectral { clusters, lap_dim } = self.coarsening {
            if clusters == 0 || lap_dim == 0 {
                return Err(Error::contract("spectral clusters and lap_dim must be at least 1"));
            }
        }
        MarkingSpec::new(self.marking.kind, self.marking.spd_dim)?;
        Ok(())
    }

    /// Orbits that can occur on pointwise arcs of graphs with up to
    /// `max_nodes` nodes; row `i` of every orbit embedding table belongs to
    /// the `i`-th of them.
    pub fn orbit_vocab(&self) -> OrbitTable {
        OrbitTable::with_filter(self.max_nodes, QuadOrbit::is_pointwise)
    }
}

/// Two-layer perceptron `relu(x W1 + b1) W2 + b2`.
#[derive(Clone, Copy, Debug)]
pub struct Mlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Mlp {
    fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        rng: &mut ChaCha8Rng,
        name: &str,
        dims: (usize, usize, usize),
    ) -> Result<Self> {
        let (i, h, o) = dims;
        Ok(Self {
            w1: store.add(format!("{name}.w1"), uniform(rng, i, h, i))?,
            b1: store.add(format!("{name}.b1"), uniform(rng, 1, h, i))?,
            w2: store.add(format!("{name}.w2"), uniform(rng, h, o, h))?,
            b2: store.add(format!("{name}.b2"), uniform(rng, 1, o, h))?,
        })
    }

    pub fn forward<F: Scalar>(&self, tape: &mut Tape<F>, store: &ParamStore<F>, x: Var) -> Result<Var> {
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let h = tape.matmul(x, w1)?;
        let h = tape.add_bias(h, b1)?;
        let h = tape.relu(h);
        let o = tape.matmul(h, w2)?;
        tape.add_bias(o, b2)
    }

    pub fn ids(&self) -> [ParamId; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

/// `uniform(-a, a)` with `a = 1 / sqrt(fan_in)`.
fn uniform<F: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix<F> {
    let a = 1.0 / (fan_in.max(1) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| F::of(rng.gen_range(-a..a)))
}

/// How incoming messages are transformed before aggregation.
#[derive(Clone, Copy, Debug)]
pub enum Message {
    Relu,
    Mlp(Mlp),
}

#[derive(Clone, Copy, Debug)]
pub struct BranchParams {
    pub branch: Branch,
    pub eps: ParamId,
    pub edge_embed: ParamId,
    pub message: Message,
    pub update: Mlp,
}

#[derive(Clone, Debug)]
pub struct LayerParams {
    pub branches: Vec<BranchParams>,
    pub combine: Mlp,
}

#[derive(Clone, Copy, Debug)]
pub struct EmbedParams {
    pub node: ParamId,
    pub mark: Option<ParamId>,
    pub size: Option<ParamId>,
    pub spd: Option<ParamId>,
}

/// Arcs of one adjacency with the embedding row of each arc's feature.
#[derive(Clone, Debug)]
pub struct BranchInput {
    pub branch: Branch,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub feat_rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub enum MarkInput {
    Simple { bit: Vec<usize> },
    NodeSize { bit: Vec<usize>, size: Vec<usize> },
    MinDistance { dist: Vec<usize> },
    /// One entry per kept distance; `owner[k]` is the product node it
    /// belongs to.
    LearnedDistance { dist: Vec<usize>, owner: Vec<usize> },
}

/// Everything the forward pass needs about one graph, independent of the
/// parameter values.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub num_nodes: usize,
    pub num_supers: usize,
    pub node_rows: Vec<usize>,
    pub mark: MarkInput,
    pub branches: Vec<BranchInput>,
    pub super_of_row: Vec<usize>,
}

impl GraphInput {
    pub fn num_rows(&self) -> usize {
        self.num_nodes * self.num_supers
    }

    pub fn branch(&self, b: Branch) -> Option<&BranchInput> {
        self.branches.iter().find(|x| x.branch == b)
    }
}

/// Encodes graphs for a fixed configuration.
#[derive(Clone, Debug)]
pub struct InputEncoder {
    config: ModelConfig,
    orbit_vocab: OrbitTable,
}

impl InputEncoder {
    pub fn new(config: &ModelConfig) -> Self {
        Self { config: config.clone(), orbit_vocab: config.orbit_vocab() }
    }

    pub fn orbit_vocab(&self) -> &OrbitTable {
        &self.orbit_vocab
    }

    pub fn encode(&self, g: &Graph) -> Result<GraphInput> {
        let cfg = &self.config;
        let n = g.num_nodes();
        if n == 0 {
            return Err(Error::contract("graph has no nodes"));
        }
        if n > cfg.max_nodes {
            return Err(Error::contract(format!("graph with {n} nodes exceeds max_nodes = {}", cfg.max_nodes)));
        }
        if let Some(&f) = g.node_feat().iter().find(|&&f| f as usize >= cfg.node_vocab) {
            return Err(Error::contract(format!("node feature {f} outside vocabulary of {}", cfg.node_vocab)));
        }
        if let Some(&f) = g.edge_feat().iter().find(|&&f| f as usize >= cfg.edge_vocab) {
            return Err(Error::contract(format!("edge feature {f} outside vocabulary of {}", cfg.edge_vocab)));
        }
        let cp = cfg.coarsening.apply(g, cfg.seed)?;
        let pg = build_product(g, &cp)?;
        let marks = mark(&cp, cfg.marking, &all_pairs_spd(g))?;
        self.encode_parts(g, &pg, &marks)
    }

    /// Encoding from an already built product graph and marking.
    pub fn encode_parts(&self, g: &Graph, pg: &ProductGraph, marks: &[Mark]) -> Result<GraphInput> {
        let n = pg.num_nodes();
        let rows = pg.num_pg_nodes();
        let cap = self.config.max_nodes;
        let node_rows = (0..rows).map(|i| g.node_feat()[i % n] as usize).collect();
        let mark = match self.config.marking.kind {
            MarkingKind::Simple => MarkInput::Simple {
                bit: marks.iter().map(|m| matches!(m, Mark::Simple(true)) as usize).collect(),
            },
            MarkingKind::NodeSize => {
                let mut bit = Vec::with_capacity(rows);
                let mut size = Vec::with_capacity(rows);
                for m in marks {
                    let Mark::NodeSize { member, size: s } = m else {
                        return Err(Error::contract("marking does not match configuration"));
                    };
                    bit.push(*member as usize);
                    size.push((*s).min(cap));
                }
                MarkInput::NodeSize { bit, size }
            }
            MarkingKind::MinDistance => MarkInput::MinDistance {
                dist: marks
                    .iter()
                    .map(|m| match m {
                        Mark::MinDistance(d) => Ok((*d as usize).min(cap)),
                        _ => Err(Error::contract("marking does not match configuration")),
                    })
                    .collect::<Result<_>>()?,
            },
            MarkingKind::LearnedDistance => {
                let mut dist = Vec::new();
                let mut owner = Vec::new();
                for (i, m) in marks.iter().enumerate() {
                    let Mark::Distances(ds) = m else {
                        return Err(Error::contract("marking does not match configuration"));
                    };
                    for &d in ds {
                        dist.push((d as usize).min(cap));
                        owner.push(i);
                    }
                }
                MarkInput::LearnedDistance { dist, owner }
            }
        };
        let mut branches = Vec::new();
        for b in Branch::ALL {
            let adj = pg.adjacency(b);
            let feat_rows = match b {
                Branch::Graph | Branch::Coarse => adj.feat.iter().map(|&f| f as usize).collect(),
                Branch::PointCol | Branch::PointRow => pg
                    .orbits(b)
                    .iter()
                    .map(|o| {
                        self.orbit_vocab.code(o).map(|c| c.0 as usize).ok_or_else(|| {
                            Error::contract(format!("orbit {o} not in the vocabulary for {cap} nodes"))
                        })
                    })
                    .collect::<Result<_>>()?,
            };
            branches.push(BranchInput { branch: b, src: adj.src.clone(), dst: adj.dst.clone(), feat_rows });
        }
        Ok(GraphInput {
            num_nodes: n,
            num_supers: pg.num_supers(),
            node_rows,
            mark,
            branches,
            super_of_row: pg.super_of_rows(),
        })
    }
}

/// Model parameters plus the layout that names them.
#[derive(Clone, Debug)]
pub struct CsGnn<F> {
    config: ModelConfig,
    encoder: InputEncoder,
    params: ParamStore<F>,
    embed: EmbedParams,
    layers: Vec<LayerParams>,
    pool_inner: Option<Mlp>,
    head: Mlp,
}

impl<F: Scalar> CsGnn<F> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let encoder = InputEncoder::new(&config);
        let d = config.hidden_dim;
        let rows_dist = config.max_nodes + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let emb = |store: &mut ParamStore<F>, rng: &mut ChaCha8Rng, name: &str, rows: usize| {
            store.add(name, uniform(rng, rows, d, d))
        };
        let node = emb(&mut store, &mut rng, "embed.node", config.node_vocab)?;
        let (mut mark_t, mut size_t, mut spd_t) = (None, None, None);
        match config.marking.kind {
            MarkingKind::Simple => mark_t = Some(emb(&mut store, &mut rng, "embed.mark", 2)?),
            MarkingKind::NodeSize => {
                mark_t = Some(emb(&mut store, &mut rng, "embed.mark", 2)?);
                size_t = Some(emb(&mut store, &mut rng, "embed.size", rows_dist)?);
            }
            MarkingKind::MinDistance | MarkingKind::LearnedDistance => {
                spd_t = Some(emb(&mut store, &mut rng, "embed.spd", rows_dist)?)
            }
        }
        let embed = EmbedParams { node, mark: mark_t, size: size_t, spd: spd_t };
        let orbit_rows = encoder.orbit_vocab().len();
        let mut layers = Vec::with_capacity(config.num_layers);
        for t in 0..config.num_layers {
            let mut branches = Vec::new();
            let mut active = vec![(Branch::Graph, "graph", config.edge_vocab), (Branch::Coarse, "coarse", 1)];
            if config.use_equiv_updates {
                active.push((Branch::PointCol, "sym_col", orbit_rows));
                active.push((Branch::PointRow, "sym_row", orbit_rows));
            }
            for (branch, tag, vocab) in active {
                let prefix = format!("layer{t}.{tag}");
                let eps = store.add(format!("{prefix}.eps"), Matrix::zeros(1, 1))?;
                let edge_embed = emb(&mut store, &mut rng, &format!("{prefix}.edge"), vocab)?;
                let message = match branch {
                    Branch::Graph | Branch::Coarse => Message::Relu,
                    _ => Message::Mlp(Mlp::new(&mut store, &mut rng, &format!("{prefix}.message"), (d, d, d))?),
                };
                let update = Mlp::new(&mut store, &mut rng, &format!("{prefix}.update"), (d, d, d))?;
                branches.push(BranchParams { branch, eps, edge_embed, message, update });
            }
            let combine = Mlp::new(&mut store, &mut rng, &format!("layer{t}.combine"), (d, d, d))?;
            layers.push(LayerParams { branches, combine });
        }
        let pool_inner = match config.pooling {
            Pooling::TwoMlp => Some(Mlp::new(&mut store, &mut rng, "pool.inner", (d, d, d))?),
            Pooling::MeanSum => None,
        };
        let head = Mlp::new(&mut store, &mut rng, "head", (d, d, 1))?;
        Ok(Self { config, encoder, params: store, embed, layers, pool_inner, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn encoder(&self) -> &InputEncoder {
        &self.encoder
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn embed_params(&self) -> &EmbedParams {
        &self.embed
    }

    pub fn pool_inner(&self) -> Option<&Mlp> {
        self.pool_inner.as_ref()
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    /// Overwrites the bias of the prediction head.
    pub fn set_output_bias(&mut self, value: F) {
        self.params.value_mut(self.head.b2).data_mut()[0] = value;
    }

    /// Same layout with parameters converted to another scalar type.
    pub fn cast<G: Scalar>(&self) -> CsGnn<G> {
        CsGnn {
            config: self.config.clone(),
            encoder: self.encoder.clone(),
            params: self.params.cast(),
            embed: self.embed,
            layers: self.layers.clone(),
            pool_inner: self.pool_inner,
            head: self.head,
        }
    }

    /// Replace every parameter value; names and shapes must match.
    pub fn load_params(&mut self, other: &ParamStore<F>) -> Result<()> {
        if other.len() != self.params.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} parameters, model expects {}",
                other.len(),
                self.params.len()
            )));
        }
        for id in self.params.ids() {
            let name = self.params.name(id).to_string();
            let src = other.id(&name).ok_or_else(|| Error::Schema(format!("missing parameter '{name}'")))?;
            let v = other.value(src);
            if v.shape() != self.params.value(id).shape() {
                return Err(Error::Schema(format!("parameter '{name}' has shape {:?}", v.shape())));
            }
            *self.params.value_mut(id) = v.clone();
        }
        Ok(())
    }

    pub fn encode(&self, g: &Graph) -> Result<GraphInput> {
        self.encoder.encode(g)
    }

    /// Initial features `X^0`: node-feature embedding plus the marking
    /// embedding of every product node.
    pub fn embed_input(&self, tape: &mut Tape<F>, input: &GraphInput) -> Result<Var> {
        let store = &self.params;
        let node_t = tape.param(store, self.embed.node);
        let x = tape.gather(node_t, &input.node_rows)?;
        let m = match &input.mark {
            MarkInput::Simple { bit } => {
                let t = tape.param(store, self.embed.mark.ok_or_else(missing)?);
                tape.gather(t, bit)?
            }
            MarkInput::NodeSize { bit, size } => {
                let t = tape.param(store, self.embed.mark.ok_or_else(missing)?);
                let a = tape.gather(t, bit)?;
                let s = tape.param(store, self.embed.size.ok_or_else(missing)?);
                let b = tape.gather(s, size)?;
                tape.add(a, b)?
            }
            MarkInput::MinDistance { dist } => {
                let t = tape.param(store, self.embed.spd.ok_or_else(missing)?);
                tape.gather(t, dist)?
            }
            MarkInput::LearnedDistance { dist, owner } => {
                let t = tape.param(store, self.embed.spd.ok_or_else(missing)?);
                let per = tape.gather(t, dist)?;
                tape.segment_sum(per, owner, input.num_rows())?
            }
        };
        tape.add(x, m)
    }

    /// Scalar prediction for one encoded graph.
    pub fn forward(&self, tape: &mut Tape<F>, input: &GraphInput) -> Result<Var> {
        let mut x = self.embed_input(tape, input)?;
        for layer in &self.layers {
            x = cs_gnn_layer(tape, &self.params, x, input, layer, self.config.residual)?;
        }
        let pooled = pool(tape, &self.params, x, input, self.config.pooling, self.pool_inner.as_ref())?;
        self.head.forward(tape, &self.params, pooled)
    }

    pub fn predict(&self, input: &GraphInput) -> Result<F> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, input)?;
        Ok(tape.value(out)[(0, 0)])
    }

    pub fn predict_graph(&self, g: &Graph) -> Result<F> {
        self.predict(&self.encode(g)?)
    }
}

fn missing() -> Error {
    Error::contract("marking embedding table missing for configured marking")
}

/// One message-passing branch:
/// `U((1 + eps) x_i + Σ_{j -> i} msg(x_j + e_{j i}))`.
pub fn gine_branch<F: Scalar>(
    tape: &mut Tape<F>,
    store: &ParamStore<F>,
    x: Var,
    input: &BranchInput,
    params: &BranchParams,
) -> Result<Var> {
    let rows = tape.value(x).rows();
    let eps = tape.param(store, params.eps);
    let own = tape.one_plus_scale(x, eps)?;
    let h = if input.src.is_empty() {
        own
    } else {
        let xs = tape.gather(x, &input.src)?;
        let table = tape.param(store, params.edge_embed);
        let e = tape.gather(table, &input.feat_rows)?;
        let pre = tape.add(xs, e)?;
        let msg = match &params.message {
            Message::Relu => tape.relu(pre),
            Message::Mlp(m) => m.forward(tape, store, pre)?,
        };
        let agg = tape.segment_sum(msg, &input.dst, rows)?;
        tape.add(own, agg)?
    };
    params.update.forward(tape, store, h)
}

/// Sum of the active branches followed by the combining MLP.
pub fn cs_gnn_layer<F: Scalar>(
    tape: &mut Tape<F>,
    store: &ParamStore<F>,
    x: Var,
    input: &GraphInput,
    layer: &LayerParams,
    residual: bool,
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for bp in &layer.branches {
        let bi = input
            .branch(bp.branch)
            .ok_or_else(|| Error::contract(format!("input lacks the {:?} adjacency", bp.branch)))?;
        let out = gine_branch(tape, store, x, bi, bp)?;
        total = Some(match total {
            None => out,
            Some(t) => tape.add(t, out)?,
        });
    }
    let total = total.ok_or_else(|| Error::contract("layer without branches"))?;
    let y = layer.combine.forward(tape, store, total)?;
    if residual {
        tape.add(y, x)
    } else {
        Ok(y)
    }
}

/// Reduces product-node features to a single row: per super-node sum (or
/// mean) over nodes, optional inner MLP, then a sum over super-nodes.
pub fn pool<F: Scalar>(
    tape: &mut Tape<F>,
    store: &ParamStore<F>,
    x: Var,
    input: &GraphInput,
    mode: Pooling,
    inner: Option<&Mlp>,
) -> Result<Var> {
    let per_super = tape.segment_sum(x, &input.super_of_row, input.num_supers)?;
    let per_super = match mode {
        Pooling::TwoMlp => match inner {
            Some(m) => m.forward(tape, store, per_super)?,
            None => per_super,
        },
        Pooling::MeanSum => tape.scale(per_super, F::one() / F::of_usize(input.num_nodes)),
    };
    let zeros = vec![0; input.num_supers];
    tape.segment_sum(per_super, &zeros, 1)
}
