//! Coarsened product-graph subgraph GNNs.
//!
//! A graph `G` is coarsened into super-nodes `T(G)`; the model runs message
//! passing on the Cartesian product `T(G) □ G`, whose nodes are pairs
//! `(S, v)`. Besides the two product adjacencies, two pointwise adjacencies
//! carry edge features naming the orbit of `(S', v', S, v)` under node
//! permutations, which ties message weights the way an equivariant linear
//! layer would.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix it
//! to `f32` (training) or `f64` (verification).

pub mod autodiff;
pub mod coarsen;
pub mod data;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod marking;
pub mod nn;
pub mod params;
pub mod product;
pub mod scalar;
pub mod symmetry;
pub mod wl;

pub use coarsen::{CoarsePartition, CoarseningSpec};
pub use data::{Dataset, Splits, Task};
pub use error::{Error, Result};
pub use graph::{all_pairs_spd, Graph, SpdMatrix};
pub use linalg::Matrix;
pub use marking::{Mark, MarkingKind, MarkingSpec};
pub use nn::{CsGnn, ModelConfig, Pooling, TrainConfig};
pub use params::{ParamId, ParamStore};
pub use product::{build_product, Branch, ProductGraph};
pub use scalar::Scalar;
pub use symmetry::{classify_pair, classify_quad, OrbitCode, OrbitTable, PairOrbit, QuadOrbit};

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Tape32 = autodiff::Tape<f32>;
pub type Tape64 = autodiff::Tape<f64>;
pub type ParamStore32 = ParamStore<f32>;
pub type ParamStore64 = ParamStore<f64>;
pub type CsGnn32 = CsGnn<f32>;
pub type CsGnn64 = CsGnn<f64>;
