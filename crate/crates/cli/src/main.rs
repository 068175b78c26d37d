mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use csgnn::data::{gen_synthetic, load_jsonl, save_jsonl, Split};
use csgnn::nn::{checkpoint, evaluate, grad_check, prepare, train, CsGnn};
use csgnn::symmetry::{pair_orbits, OrbitTable, THREE_IGN_PARAMS};
use csgnn::wl::{degree_three_experiment, two_pentagons_glued, two_squares_bridged};
use csgnn::{build_product, Branch, Dataset, Graph, Task};
use serde_json::json;

use config::{parse_bool, parse_pooling, parse_spd_dim, RunConfig};

const THREADS_ENV: &str = "CSGNN_THREADS";

#[derive(Parser)]
#[command(name = "csgnn", version, about = "Coarsened product-graph subgraph GNN toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coarsen one graph and print its super-nodes and coarse edges.
    Coarsen(GraphCmd),
    /// Build the coarse product graph of one graph and print arc counts.
    BuildProduct(GraphCmd),
    /// List the orbits of one index block.
    Orbits(OrbitsCmd),
    /// Run a named WL separation experiment.
    WlTest(WlCmd),
    /// Compare model gradients against finite differences on a 6-node graph.
    GradCheck(GradCheckCmd),
    /// Generate a synthetic JSONL dataset.
    GenData(GenDataCmd),
    /// Train a model and write metrics.csv and checkpoint.json.
    Train(RunCmd),
    /// Evaluate a checkpoint on every split of a dataset.
    Eval(EvalCmd),
}

/// Overrides for the run configuration. Defaults: seed 0, epochs 100,
/// lr 0.0005, batch_size 32, layers 3, hidden_dim 32, clusters 2,
/// lap_dim 1, spd_dim 10, marking learned_distance, coarsening spectral,
/// equiv_updates true, pooling two_mlp, residual false, out ./out.
#[derive(Args, Clone, Debug, Default)]
struct Overrides {
    /// Flat key = value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Number of spectral clusters (bag size).
    #[arg(long)]
    clusters: Option<usize>,
    /// Laplacian eigenvectors used by spectral clustering.
    #[arg(long)]
    lap_dim: Option<usize>,
    /// Distances kept by learned_distance marking; `none` keeps all.
    #[arg(long)]
    spd_dim: Option<String>,
    /// simple | node_size | min_distance | learned_distance
    #[arg(long)]
    marking: Option<String>,
    /// spectral | identity | degree3 | node_plus_edge | single
    #[arg(long)]
    coarsening: Option<String>,
    /// true | false
    #[arg(long)]
    equiv_updates: Option<String>,
    /// two_mlp | mean_sum
    #[arg(long)]
    pooling: Option<String>,
    /// true | false
    #[arg(long)]
    residual: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        set!(seed);
        set!(epochs);
        set!(lr);
        set!(batch_size);
        set!(layers);
        set!(hidden_dim);
        set!(clusters);
        set!(lap_dim);
        if let Some(v) = &self.spd_dim {
            cfg.spd_dim = parse_spd_dim(v).context("--spd-dim")?;
        }
        if let Some(v) = &self.marking {
            cfg.marking = v.parse().context("--marking")?;
        }
        if let Some(v) = &self.coarsening {
            cfg.set("coarsening", v).context("--coarsening")?;
        }
        if let Some(v) = &self.equiv_updates {
            cfg.equiv_updates = parse_bool(v).context("--equiv-updates")?;
        }
        if let Some(v) = &self.pooling {
            cfg.pooling = parse_pooling(v).context("--pooling")?;
        }
        if let Some(v) = &self.residual {
            cfg.residual = parse_bool(v).context("--residual")?;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct GraphCmd {
    /// Named graph: fig10-g, fig10-h, path:N, cycle:N, complete:N.
    #[arg(long, conflicts_with = "data")]
    graph: Option<String>,
    /// JSONL dataset to take the graph from.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Line of the dataset, counted from 0.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum OrbitMode {
    Pair,
    Quad,
}

#[derive(Args)]
struct OrbitsCmd {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum)]
    mode: OrbitMode,
    /// Set size of the block; quad mode uses it for both sets.
    #[arg(long)]
    block_size: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct WlCmd {
    /// fig10: bridged squares vs glued pentagons under degree-3 coarsening.
    #[arg(long)]
    pair: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GradCheckCmd {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenDataCmd {
    /// triangle_count | diameter | constant
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 200)]
    graphs: usize,
    #[arg(long, default_value_t = 8)]
    nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSONL file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunCmd {
    /// JSONL dataset (or `data` in the config file).
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    run: Overrides,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    run: Overrides,
}

fn threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let t: usize = v.parse().with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
            if t == 0 {
                bail!("{THREADS_ENV} must be a positive integer, got '0'");
            }
            Ok(Some(t))
        }
        Err(_) => Ok(None),
    }
}

fn ensure_exists(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn load_data(path: &Path) -> Result<Dataset> {
    ensure_exists(path, "data file")?;
    Ok(load_jsonl(path)?)
}

fn named_graph(name: &str) -> Result<Graph> {
    let sized = |prefix: &str| -> Result<Option<usize>> {
        match name.strip_prefix(prefix) {
            Some(n) => Ok(Some(n.parse().with_context(|| format!("bad size in graph name '{name}'"))?)),
            None => Ok(None),
        }
    };
    if name == "fig10-g" {
        return Ok(two_squares_bridged());
    }
    if name == "fig10-h" {
        return Ok(two_pentagons_glued());
    }
    if let Some(n) = sized("path:")? {
        return Ok(Graph::path(n));
    }
    if let Some(n) = sized("cycle:")? {
        return Ok(Graph::cycle(n));
    }
    if let Some(n) = sized("complete:")? {
        return Ok(Graph::complete(n));
    }
    bail!("unknown graph '{name}' (expected fig10-g, fig10-h, path:N, cycle:N or complete:N)")
}

fn pick_graph(cmd: &GraphCmd) -> Result<Graph> {
    match (&cmd.graph, &cmd.data) {
        (Some(name), _) => named_graph(name),
        (None, Some(path)) => {
            let ds = load_data(path)?;
            ds.graphs
                .get(cmd.index)
                .cloned()
                .with_context(|| format!("index {} out of range for {} graphs", cmd.index, ds.len()))
        }
        (None, None) => bail!("pass --graph NAME or --data FILE"),
    }
}

fn cmd_coarsen(cmd: &GraphCmd) -> Result<()> {
    let cfg = cmd.run.resolve()?;
    let g = pick_graph(cmd)?;
    let spec = cfg.coarsening_spec()?;
    let cp = spec.apply(&g, cfg.seed)?;
    println!("coarsening: {spec} on {} nodes, {} edges", g.num_nodes(), g.num_edges());
    println!("super-nodes: {}", cp.num_supers());
    for (i, s) in cp.super_nodes().iter().enumerate() {
        println!("  S{i} = {s:?}");
    }
    println!("coarse edges: {:?}", cp.coarse_edges());
    let path = write_out(&cfg.out, "coarsening.json", &serde_json::to_string_pretty(&cp)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_build_product(cmd: &GraphCmd) -> Result<()> {
    let cfg = cmd.run.resolve()?;
    let g = pick_graph(cmd)?;
    let cp = cfg.coarsening_spec()?.apply(&g, cfg.seed)?;
    let pg = build_product(&g, &cp)?;
    println!("product nodes: {} ({} super-nodes x {} nodes)", pg.num_pg_nodes(), pg.num_supers(), pg.num_nodes());
    let mut adj = serde_json::Map::new();
    for b in Branch::ALL {
        let a = pg.adjacency(b);
        let name = match b {
            Branch::Graph => "graph",
            Branch::Coarse => "coarse",
            Branch::PointCol => "point_col",
            Branch::PointRow => "point_row",
        };
        println!("  {name}: {} arcs", a.len());
        adj.insert(name.into(), json!(a.arcs().map(|(s, d, f)| [s as u64, d as u64, f as u64]).collect::<Vec<_>>()));
    }
    let doc = json!({
        "num_supers": pg.num_supers(),
        "num_nodes": pg.num_nodes(),
        "supers": pg.supers(),
        "arcs": adj,
    });
    let path = write_out(&cfg.out, "product.json", &serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_orbits(cmd: &OrbitsCmd) -> Result<()> {
    if cmd.n == 0 || cmd.block_size == 0 || cmd.block_size > cmd.n {
        bail!("need 1 <= block-size <= n, got n = {}, block-size = {}", cmd.n, cmd.block_size);
    }
    let k = cmd.block_size;
    let names: Vec<String> = match cmd.mode {
        OrbitMode::Pair => pair_orbits(cmd.n).into_iter().filter(|o| o.size == k).map(|o| o.to_string()).collect(),
        OrbitMode::Quad => OrbitTable::with_filter(cmd.n, |o| o.k1 == k && o.k2 == k)
            .orbits()
            .iter()
            .map(|o| o.to_string())
            .collect(),
    };
    let mut csv = String::from("index,orbit\n");
    for (i, name) in names.iter().enumerate() {
        println!("{i:>4}  {name}");
        csv.push_str(&format!("{i},{name}\n"));
    }
    println!("{} orbits", names.len());
    if cmd.mode == OrbitMode::Quad && k == 2 {
        println!("3-IGN parameters for the same block: {THREE_IGN_PARAMS}");
    }
    let path = write_out(&cmd.out, "orbits.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn verdict(separated: bool) -> &'static str {
    if separated {
        "separated"
    } else {
        "not separated"
    }
}

fn cmd_wl_test(cmd: &WlCmd) -> Result<()> {
    if cmd.pair != "fig10" {
        bail!("unknown pair '{}' (available: fig10)", cmd.pair);
    }
    let r = degree_three_experiment()?;
    let (a, b) = r.learned_distance_max.mark_sums;
    println!(
        "sum-graph: {}; product(pi_LD,max): {} ({a} vs {b})",
        verdict(r.sum_graph_separated),
        verdict(r.learned_distance_max.separated)
    );
    println!("raw 1-WL: {}", verdict(r.raw_separated));
    println!("product(pi_S): {}", verdict(r.simple_marking.separated));
    let doc = json!({
        "pair": cmd.pair,
        "coarsening": "degree3",
        "raw_separated": r.raw_separated,
        "sum_graph_separated": r.sum_graph_separated,
        "product_simple_separated": r.simple_marking.separated,
        "product_learned_distance_max_separated": r.learned_distance_max.separated,
        "max_distance_sums": [a, b],
    });
    write_out(&cmd.out, "wl_test.json", &serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// Tolerance on the maximum relative gradient error.
const GRAD_TOL: f64 = 1e-5;

fn cmd_grad_check(cmd: &GradCheckCmd) -> Result<()> {
    let (g, model) = csgnn::nn::gradcheck::fixture(cmd.seed, cmd.hidden_dim, cmd.layers)?;
    let r = grad_check(&model, &g, csgnn::nn::gradcheck::FIXTURE_TARGET, csgnn::nn::gradcheck::DEFAULT_STEP)?;
    let worst = r.worst.as_ref().map_or_else(String::new, |(n, k)| format!(" at {n}[{k}]"));
    println!("checked {} parameters ({} one-sided, {} with a reduced step)", r.num_checked, r.one_sided, r.refined);
    println!("max relative error: {:.3e}{worst}", r.max_rel_error);
    let doc = json!({
        "seed": cmd.seed,
        "num_checked": r.num_checked,
        "one_sided": r.one_sided,
        "refined": r.refined,
        "max_rel_error": r.max_rel_error,
    });
    write_out(&cmd.out, "grad_check.json", &serde_json::to_string_pretty(&doc)?)?;
    if r.max_rel_error.is_nan() || r.max_rel_error >= GRAD_TOL {
        bail!("gradient check failed: {:.3e} >= {GRAD_TOL:e}", r.max_rel_error);
    }
    println!("ok");
    Ok(())
}

fn cmd_gen_data(cmd: &GenDataCmd) -> Result<()> {
    let task: Task = cmd.task.parse()?;
    let ds = gen_synthetic(task, cmd.graphs, cmd.nodes, cmd.seed);
    if let Some(dir) = cmd.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    save_jsonl(&ds, &cmd.out)?;
    println!("wrote {} graphs to {}", ds.len(), cmd.out.display());
    Ok(())
}

fn data_path(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.clone().or_else(|| cfg.data.clone()).context("no dataset given (use --data or `data =` in the config)")
}

fn cmd_train(cmd: &RunCmd) -> Result<()> {
    let mut cfg = cmd.run.resolve()?;
    let path = data_path(&cmd.data, &cfg)?;
    cfg.data = Some(path.clone());
    let ds = load_data(&path)?;
    if ds.is_empty() {
        bail!("dataset {} is empty", path.display());
    }
    let model_cfg = cfg.model_config(ds.max_nodes(), ds.node_vocab, ds.edge_vocab)?;
    let tc = cfg.train_config(threads()?)?;
    let mut model = CsGnn::<f32>::new(model_cfg)?;
    println!(
        "training on {} graphs: {} parameters, {} epochs, lr {}, batch {}",
        ds.len(),
        model.params().num_scalars(),
        tc.epochs,
        tc.lr,
        tc.batch_size
    );
    let report = train(&mut model, &ds, &tc)?;
    for m in &report.trace {
        match m.val_mae {
            Some(v) => println!("epoch {:>4}  train {:.6}  val {:.6}", m.epoch, m.train_mae, v),
            None => println!("epoch {:>4}  train {:.6}", m.epoch, m.train_mae),
        }
    }
    let metrics = write_out(&cfg.out, "metrics.csv", &report.to_csv())?;
    write_out(&cfg.out, "run.cfg", &cfg.to_text())?;
    checkpoint::save(&model, cfg.out.join("checkpoint.json"))?;
    println!("wrote {} and {}", metrics.display(), cfg.out.join("checkpoint.json").display());
    Ok(())
}

fn cmd_eval(cmd: &EvalCmd) -> Result<()> {
    let cfg = cmd.run.resolve()?;
    ensure_exists(&cmd.checkpoint, "checkpoint")?;
    let model = checkpoint::load::<f32>(&cmd.checkpoint)?;
    let ds = load_data(&data_path(&cmd.data, &cfg)?)?;
    if ds.is_empty() {
        bail!("dataset is empty");
    }
    let splits = ds.splits(model.config().seed);
    let data = prepare(&model, &ds)?;
    let mut csv = String::from("split,mae\n");
    for split in [Split::Train, Split::Val, Split::Test] {
        let idx = splits.get(split);
        if idx.is_empty() {
            continue;
        }
        let mae = evaluate(&model, &data, idx)?;
        println!("{:<5}  mae {mae:.6}  ({} graphs)", split.as_str(), idx.len());
        csv.push_str(&format!("{},{mae}\n", split.as_str()));
    }
    write_out(&cfg.out, "eval.csv", &csv)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Command::Coarsen(c) => cmd_coarsen(c),
        Command::BuildProduct(c) => cmd_build_product(c),
        Command::Orbits(c) => cmd_orbits(c),
        Command::WlTest(c) => cmd_wl_test(c),
        Command::GradCheck(c) => cmd_grad_check(c),
        Command::GenData(c) => cmd_gen_data(c),
        Command::Train(c) => cmd_train(c),
        Command::Eval(c) => cmd_eval(c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
