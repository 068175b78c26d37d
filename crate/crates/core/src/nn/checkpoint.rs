//! JSON checkpoints.
//!
//! Top-level fields, in order: `format` (always `"csgnn-checkpoint"`),
//! `version`, `scalar` (`"f32"` or `"f64"`), `config` (the model
//! configuration) and `params`, a list of `{name, rows, cols, data}` in
//! registration order with `data` row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::model::{CsGnn, ModelConfig};
use crate::params::ParamStore;
use crate::scalar::Scalar;

pub const FORMAT: &str = "csgnn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry<F> {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
struct Checkpoint<F> {
    format: String,
    version: u32,
    scalar: String,
    config: ModelConfig,
    params: Vec<Entry<F>>,
}

pub fn to_json<F: Scalar + Serialize>(model: &CsGnn<F>) -> Result<String> {
    let ck = Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        scalar: F::NAME.into(),
        config: model.config().clone(),
        params: model
            .params()
            .iter()
            .map(|(_, name, v)| Entry { name: name.into(), rows: v.rows(), cols: v.cols(), data: v.data().to_vec() })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&ck)?)
}

pub fn from_json<F: Scalar + for<'de> Deserialize<'de>>(text: &str) -> Result<CsGnn<F>> {
    let ck: Checkpoint<F> = serde_json::from_str(text)?;
    if ck.format != FORMAT {
        return Err(Error::Schema(format!("not a checkpoint (format '{}')", ck.format)));
    }
    if ck.version != VERSION {
        return Err(Error::Schema(format!("unsupported checkpoint version {}", ck.version)));
    }
    if ck.scalar != F::NAME {
        return Err(Error::Schema(format!("checkpoint holds {} parameters, expected {}", ck.scalar, F::NAME)));
    }
    let mut store = ParamStore::new();
    for e in ck.params {
        store.add(e.name, Matrix::from_vec(e.rows, e.cols, e.data)?)?;
    }
    let mut model = CsGnn::new(ck.config)?;
    model.load_params(&store)?;
    Ok(model)
}

pub fn save<F: Scalar + Serialize>(model: &CsGnn<F>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load<F: Scalar + for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<CsGnn<F>> {
    let path = path.as_ref();
    from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
