//! Finite-difference check of the model's reverse-mode gradients.
//!
//! The model is piecewise linear in any single parameter, so a difference
//! quotient is exact up to roundoff as long as its stencil stays inside the
//! linear piece of the base point. Each entry uses the central quotient
//! when both `θ ± h` keep the base activation pattern, otherwise the
//! one-sided quotient on a side that keeps it. When both sides leave the
//! piece the step is divided by 10 (down to [`MIN_STEP`]) until one side
//! stays; such entries are counted in `refined`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::nn::model::{CsGnn, GraphInput, ModelConfig};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const MIN_STEP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub num_checked: usize,
    pub one_sided: usize,
    pub refined: usize,
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

/// `|a - b| / max(|a|, |b|, 1e-6)`; the floor keeps entries whose true
/// gradient is zero from dividing roundoff by zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn loss(model: &CsGnn<f64>, input: &GraphInput, y: f64, tape: &mut Tape<f64>) -> Result<Var> {
    let pred = model.forward(tape, input)?;
    let t = tape.constant(Matrix::filled(1, 1, y));
    let d = tape.sub(pred, t)?;
    Ok(tape.abs(d))
}

fn eval(model: &CsGnn<f64>, input: &GraphInput, y: f64) -> Result<(f64, Vec<bool>)> {
    let mut t = Tape::new();
    let v = loss(model, input, y, &mut t)?;
    Ok((t.value(v)[(0, 0)], t.activation_pattern()))
}

/// Compares `d|model(g) - y| / dθ` against difference quotients with step
/// `h` for every scalar parameter.
pub fn grad_check(model: &CsGnn<f64>, g: &Graph, y: f64, h: f64) -> Result<GradCheckReport> {
    let input = model.encode(g)?;
    let mut tape = Tape::new();
    let l = loss(model, &input, y, &mut tape)?;
    let f0 = tape.value(l)[(0, 0)];
    let base = tape.activation_pattern();
    let grads = tape.backward(l)?;
    let mut probe = model.clone();
    let mut report = GradCheckReport { num_checked: 0, one_sided: 0, refined: 0, max_rel_error: 0.0, worst: None };
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let len = model.params().value(id).data().len();
        for k in 0..len {
            let orig = model.params().value(id).data()[k];
            let mut step = h;
            let fd = loop {
                probe.params_mut().value_mut(id).data_mut()[k] = orig + step;
                let (fp, pp) = eval(&probe, &input, y)?;
                probe.params_mut().value_mut(id).data_mut()[k] = orig - step;
                let (fm, pm) = eval(&probe, &input, y)?;
                probe.params_mut().value_mut(id).data_mut()[k] = orig;
                match (pp == base, pm == base) {
                    (true, true) => break (fp - fm) / (2.0 * step),
                    (true, false) => {
                        report.one_sided += 1;
                        break (fp - f0) / step;
                    }
                    (false, true) => {
                        report.one_sided += 1;
                        break (f0 - fm) / step;
                    }
                    (false, false) if step / 10.0 >= MIN_STEP => {
                        if step == h {
                            report.refined += 1;
                        }
                        step /= 10.0;
                    }
                    (false, false) => break (fp - fm) / (2.0 * step),
                }
            };
            let ad = grads.get(id).map_or(0.0, |m| m.data()[k]);
            let err = relative_error(ad, fd);
            report.num_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((model.params().name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}

/// Target used with [`fixture`]; far from any prediction so the loss stays
/// on one side of its kink.
pub const FIXTURE_TARGET: f64 = 10.0;

/// A seeded 6-node graph with node and edge labels, and a model over it
/// using spectral coarsening into two super-nodes, learned-distance marking
/// and all four branches.
pub fn fixture(seed: u64, hidden_dim: usize, num_layers: usize) -> Result<(Graph, CsGnn<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Graph::random(6, 0.5, &mut rng);
    let nf = (0..6).map(|i| (i % 3) as u32).collect();
    let ef = (0..shape.num_edges()).map(|i| (i % 2) as u32).collect();
    let g = Graph::new(6, shape.edges().to_vec(), nf, ef)?;
    let cfg = ModelConfig {
        num_layers,
        hidden_dim,
        max_nodes: 6,
        node_vocab: 3,
        edge_vocab: 2,
        seed,
        ..ModelConfig::default()
    };
    Ok((g, CsGnn::new(cfg)?))
}
