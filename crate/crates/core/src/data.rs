//! Graph regression datasets: JSONL persistence, splits and synthetic
//! generators.
//!
//! One graph per line:
//! `{"n": 3, "edges": [[0,1],[1,2]], "nf": [0,0,0], "ef": [0,0], "y": 1.0}`
//! with `u < v` on every edge and `ef` aligned with `edges`. An optional
//! `"split"` field (`"train"`, `"val"` or `"test"`) fixes the split; it must
//! be present on every line or on none.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{all_pairs_spd, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Disjoint index lists into a dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Seeded shuffle cut 80/10/10.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = len * 8 / 10;
        let n_val = len / 10;
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Self { train: idx, val, test }
    }

    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub targets: Vec<f64>,
    /// Per-graph split from the file, if it had one.
    pub assigned: Option<Vec<Split>>,
    pub node_vocab: usize,
    pub edge_vocab: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, targets: Vec<f64>) -> Result<Self> {
        if graphs.len() != targets.len() {
            return Err(Error::contract(format!("{} graphs but {} targets", graphs.len(), targets.len())));
        }
        let node_vocab = vocab(graphs.iter().flat_map(|g| g.node_feat()));
        let edge_vocab = vocab(graphs.iter().flat_map(|g| g.edge_feat()));
        Ok(Self { name: name.into(), graphs, targets, assigned: None, node_vocab, edge_vocab })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn max_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::num_nodes).max().unwrap_or(0)
    }

    /// In-file splits when present, otherwise the seeded 80/10/10 shuffle.
    pub fn splits(&self, seed: u64) -> Splits {
        match &self.assigned {
            Some(a) => {
                let mut s = Splits::default();
                for (i, sp) in a.iter().enumerate() {
                    match sp {
                        Split::Train => s.train.push(i),
                        Split::Val => s.val.push(i),
                        Split::Test => s.test.push(i),
                    }
                }
                s
            }
            None => Splits::random(self.len(), seed),
        }
    }
}

fn vocab<'a>(ids: impl Iterator<Item = &'a u32>) -> usize {
    ids.max().map_or(1, |&m| m as usize + 1)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    n: usize,
    edges: Vec<[i64; 2]>,
    nf: Vec<i64>,
    ef: Vec<i64>,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

fn feature_id(x: i64, what: &str) -> std::result::Result<u32, String> {
    u32::try_from(x).map_err(|_| format!("{what} id {x} does not fit a u32"))
}

fn record_to_graph(r: &Record) -> std::result::Result<Graph, String> {
    let mut edges = Vec::with_capacity(r.edges.len());
    for &[u, v] in &r.edges {
        if u < 0 || v < 0 || u >= v {
            return Err(format!("edge [{u},{v}] must satisfy 0 <= u < v"));
        }
        edges.push((u as usize, v as usize));
    }
    let nf = r.nf.iter().map(|&x| feature_id(x, "node feature")).collect::<std::result::Result<_, _>>()?;
    let ef = r.ef.iter().map(|&x| feature_id(x, "edge feature")).collect::<std::result::Result<_, _>>()?;
    Graph::new(r.n, edges, nf, ef).map_err(|e| e.to_string())
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut graphs = Vec::new();
    let mut targets = Vec::new();
    let mut splits = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let g = record_to_graph(&rec).map_err(|m| Error::Schema(format!("{}:{}: {m}", path.display(), i + 1)))?;
        graphs.push(g);
        targets.push(rec.y);
        splits.push(rec.split);
    }
    let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let mut ds = Dataset::new(name, graphs, targets)?;
    let tagged = splits.iter().filter(|s| s.is_some()).count();
    if tagged == splits.len() && tagged > 0 {
        ds.assigned = Some(splits.into_iter().flatten().collect());
    } else if tagged > 0 {
        return Err(Error::Schema(format!(
            "{}: {tagged} of {} lines carry a split",
            path.display(),
            splits.len()
        )));
    }
    Ok(ds)
}

pub fn save_jsonl(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (i, (g, &y)) in ds.graphs.iter().zip(&ds.targets).enumerate() {
        let rec = Record {
            n: g.num_nodes(),
            edges: g.edges().iter().map(|&(u, v)| [u as i64, v as i64]).collect(),
            nf: g.node_feat().iter().map(|&x| x as i64).collect(),
            ef: g.edge_feat().iter().map(|&x| x as i64).collect(),
            y,
            split: ds.assigned.as_ref().map(|a| a[i]),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    TriangleCount,
    Diameter,
    Constant,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "triangle_count" => Task::TriangleCount,
            "diameter" => Task::Diameter,
            "constant" => Task::Constant,
            other => return Err(Error::contract(format!("unknown task '{other}'"))),
        })
    }
}

/// Value every graph gets under [`Task::Constant`].
pub const CONSTANT_TARGET: f64 = 1.5;

/// Edge probability of the random graphs.
pub const EDGE_PROB: f64 = 0.4;

pub fn triangle_count(g: &Graph) -> usize {
    let n = g.num_nodes();
    let mut count = 0;
    for a in 0..n {
        for b in a + 1..n {
            if !g.has_edge(a, b) {
                continue;
            }
            for c in b + 1..n {
                if g.has_edge(a, c) && g.has_edge(b, c) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Largest finite shortest-path distance.
pub fn diameter(g: &Graph) -> u32 {
    let spd = all_pairs_spd(g);
    let n = g.num_nodes();
    (0..n)
        .flat_map(|u| spd.row(u).to_vec())
        .filter(|&d| d != spd.unreachable())
        .max()
        .unwrap_or(0)
}

pub fn target(task: Task, g: &Graph) -> f64 {
    match task {
        Task::TriangleCount => triangle_count(g) as f64,
        Task::Diameter => diameter(g) as f64,
        Task::Constant => CONSTANT_TARGET,
    }
}

/// `n_graphs` random graphs on `n_nodes` nodes with edge probability
/// [`EDGE_PROB`], unlabeled, and exact targets.
pub fn gen_synthetic(task: Task, n_graphs: usize, n_nodes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs: Vec<Graph> = (0..n_graphs).map(|_| Graph::random(n_nodes, EDGE_PROB, &mut rng)).collect();
    let targets = graphs.iter().map(|g| target(task, g)).collect();
    let name = match task {
        Task::TriangleCount => "triangle_count",
        Task::Diameter => "diameter",
        Task::Constant => "constant",
    };
    Dataset::new(name, graphs, targets).expect("one target per graph")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_targets() {
        assert_eq!(triangle_count(&Graph::complete(4)), 4);
        assert_eq!(diameter(&Graph::path(5)), 4);
        assert_eq!(triangle_count(&Graph::cycle(4)), 0);
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let s = Splits::random(25, 3);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..25).collect::<Vec<_>>());
        assert_eq!((s.train.len(), s.val.len()), (20, 2));
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(gen_synthetic(Task::TriangleCount, 5, 6, 1), gen_synthetic(Task::TriangleCount, 5, 6, 1));
    }
}
