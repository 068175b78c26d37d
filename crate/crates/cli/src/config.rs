//! Flat `key = value` run configuration. Everything after `#` is a comment
//! and blank lines are ignored; command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use csgnn::{CoarseningSpec, MarkingKind, MarkingSpec, ModelConfig, Pooling, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    pub clusters: usize,
    pub lap_dim: usize,
    pub spd_dim: Option<usize>,
    pub marking: MarkingKind,
    pub coarsening: String,
    pub equiv_updates: bool,
    pub pooling: Pooling,
    pub residual: bool,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 100,
            lr: 5e-4,
            batch_size: 32,
            layers: 3,
            hidden_dim: 32,
            clusters: 2,
            lap_dim: 1,
            spd_dim: Some(10),
            marking: MarkingKind::LearnedDistance,
            coarsening: "spectral".into(),
            equiv_updates: true,
            pooling: Pooling::TwoMlp,
            residual: false,
            data: None,
            out: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "epochs",
    "lr",
    "batch_size",
    "layers",
    "hidden_dim",
    "clusters",
    "lap_dim",
    "spd_dim",
    "marking",
    "coarsening",
    "equiv_updates",
    "pooling",
    "residual",
    "data",
    "out",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow!("bad value '{value}' for '{key}': {e}"))
}

pub fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("expected true or false, got '{value}'"),
    }
}

pub fn parse_pooling(value: &str) -> Result<Pooling> {
    match value {
        "two_mlp" | "two-mlp" => Ok(Pooling::TwoMlp),
        "mean_sum" | "mean-sum" => Ok(Pooling::MeanSum),
        _ => bail!("unknown pooling '{value}' (expected two_mlp or mean_sum)"),
    }
}

/// `none`, `all` or `inf` disable truncation.
pub fn parse_spd_dim(value: &str) -> Result<Option<usize>> {
    match value {
        "none" | "all" | "inf" => Ok(None),
        v => Ok(Some(parse("spd_dim", v)?)),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "clusters" => self.clusters = parse(key, value)?,
            "lap_dim" => self.lap_dim = parse(key, value)?,
            "spd_dim" => self.spd_dim = parse_spd_dim(value)?,
            "marking" => self.marking = parse(key, value)?,
            "coarsening" => {
                value.parse::<CoarseningSpec>()?;
                self.coarsening = value.to_string();
            }
            "equiv_updates" => self.equiv_updates = parse_bool(value)?,
            "pooling" => self.pooling = parse_pooling(value)?,
            "residual" => self.residual = parse_bool(value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            _ => bail!("unknown config key '{key}' (known keys: {})", KEYS.join(", ")),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split_once('#').map_or(line, |(before, _)| before).trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), i + 1))?;
            cfg.set(k.trim(), v.trim()).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(cfg)
    }

    pub fn coarsening_spec(&self) -> Result<CoarseningSpec> {
        Ok(match self.coarsening.parse::<CoarseningSpec>()? {
            CoarseningSpec::Spectral { .. } => CoarseningSpec::Spectral { clusters: self.clusters, lap_dim: self.lap_dim },
            other => other,
        })
    }

    pub fn model_config(&self, max_nodes: usize, node_vocab: usize, edge_vocab: usize) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            num_layers: self.layers,
            hidden_dim: self.hidden_dim,
            marking: MarkingSpec::new(self.marking, self.spd_dim)?,
            coarsening: self.coarsening_spec()?,
            use_equiv_updates: self.equiv_updates,
            pooling: self.pooling,
            residual: self.residual,
            seed: self.seed,
            max_nodes,
            node_vocab,
            edge_vocab,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self, threads: Option<usize>) -> Result<TrainConfig> {
        if self.epochs == 0 {
            bail!("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            bail!("batch_size must be at least 1");
        }
        Ok(TrainConfig { epochs: self.epochs, lr: self.lr, batch_size: self.batch_size, seed: self.seed, threads })
    }

    /// Config file text that reproduces this configuration.
    pub fn to_text(&self) -> String {
        let spd = self.spd_dim.map_or_else(|| "none".to_string(), |d| d.to_string());
        let pooling = match self.pooling {
            Pooling::TwoMlp => "two_mlp",
            Pooling::MeanSum => "mean_sum",
        };
        let mut s = String::new();
        for (k, v) in [
            ("seed", self.seed.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("layers", self.layers.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("clusters", self.clusters.to_string()),
            ("lap_dim", self.lap_dim.to_string()),
            ("spd_dim", spd),
            ("marking", self.marking.to_string()),
            ("coarsening", self.coarsening.clone()),
            ("equiv_updates", self.equiv_updates.to_string()),
            ("pooling", pooling.to_string()),
            ("residual", self.residual.to_string()),
        ] {
            s.push_str(&format!("{k} = {v}\n"));
        }
        if let Some(d) = &self.data {
            s.push_str(&format!("data = {}\n", d.display()));
        }
        s.push_str(&format!("out = {}\n", self.out.display()));
        s
    }
}
