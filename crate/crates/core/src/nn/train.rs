//! Mini-batch training with L1 loss and Adam.
//!
//! Graphs within a batch are processed in parallel; their gradients are
//! collected in batch order and summed sequentially so the result does not
//! depend on the number of threads.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{Gradients, Tape};
use crate::data::{Dataset, Split, Splits};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::model::{CsGnn, GraphInput};
use crate::nn::optim::Adam;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Seeds batch shuffling and the random split.
    pub seed: u64,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, lr: 5e-4, batch_size: 32, seed: 0, threads: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub trace: Vec<EpochMetrics>,
}

impl TrainReport {
    /// `epoch,split,mae` rows, epochs counted from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,split,mae\n");
        for m in &self.trace {
            let _ = writeln!(s, "{},train,{}", m.epoch, m.train_mae);
            if let Some(v) = m.val_mae {
                let _ = writeln!(s, "{},val,{}", m.epoch, v);
            }
        }
        s
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.trace.last()
    }
}

/// Encoded graphs plus targets, ready for repeated passes.
pub struct Prepared {
    pub inputs: Vec<GraphInput>,
    pub targets: Vec<f64>,
}

pub fn prepare<F: Scalar>(model: &CsGnn<F>, ds: &Dataset) -> Result<Prepared> {
    let inputs = ds.graphs.par_iter().map(|g| model.encode(g)).collect::<Result<Vec<_>>>()?;
    Ok(Prepared { inputs, targets: ds.targets.clone() })
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    b.build().map_err(|e| Error::contract(format!("thread pool: {e}")))
}

fn loss_and_grads<F: Scalar>(model: &CsGnn<F>, input: &GraphInput, y: f64) -> Result<(F, Gradients<F>)> {
    let mut tape = Tape::new();
    let pred = model.forward(&mut tape, input)?;
    let target = tape.constant(Matrix::filled(1, 1, F::of(y)));
    let diff = tape.sub(pred, target)?;
    let loss = tape.abs(diff);
    let value = tape.value(loss)[(0, 0)];
    Ok((value, tape.backward(loss)?))
}

/// Mean absolute error over `idx`.
pub fn evaluate<F: Scalar>(model: &CsGnn<F>, data: &Prepared, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let errs = idx
        .par_iter()
        .map(|&i| Ok((model.predict(&data.inputs[i])?.as_f64() - data.targets[i]).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Trains on the split given by `ds.splits(tc.seed)`. The output bias
/// starts at the median training target.
pub fn train<F: Scalar>(model: &mut CsGnn<F>, ds: &Dataset, tc: &TrainConfig) -> Result<TrainReport> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let splits = ds.splits(tc.seed);
    if splits.train.is_empty() {
        return Err(Error::contract("training split is empty"));
    }
    let data = pool(tc.threads)?.install(|| prepare(model, ds))?;
    let mut ys: Vec<f64> = splits.train.iter().map(|&i| ds.targets[i]).collect();
    ys.sort_by(f64::total_cmp);
    model.set_output_bias(F::of(ys[ys.len() / 2]));
    train_prepared(model, &data, &splits, tc)
}

pub fn train_prepared<F: Scalar>(
    model: &mut CsGnn<F>,
    data: &Prepared,
    splits: &Splits,
    tc: &TrainConfig,
) -> Result<TrainReport> {
    if tc.epochs == 0 || tc.batch_size == 0 {
        return Err(Error::contract("epochs and batch_size must be at least 1"));
    }
    let pool = pool(tc.threads)?;
    let mut adam = Adam::new(model.params(), tc.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order = splits.train.clone();
    let mut report = TrainReport::default();
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(tc.batch_size) {
            let model_ref = &*model;
            let results = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| loss_and_grads(model_ref, &data.inputs[i], data.targets[i]))
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut total = Gradients::zeros_like(model.params());
            for (i, (loss, g)) in batch.iter().zip(&results) {
                if !loss.is_finite() || !g.is_finite() {
                    return Err(Error::Diverged { epoch, detail: format!("non-finite loss or gradient on graph {i}") });
                }
                total.accumulate(g);
            }
            total.scale(F::one() / F::of_usize(batch.len()));
            adam.step(model.params_mut(), &total);
        }
        let (train_mae, val_mae) = pool.install(|| -> Result<_> {
            let t = evaluate(model, data, splits.get(Split::Train))?;
            let v = if splits.val.is_empty() { None } else { Some(evaluate(model, data, &splits.val)?) };
            Ok((t, v))
        })?;
        if !train_mae.is_finite() {
            return Err(Error::Diverged { epoch, detail: format!("train MAE is {train_mae}") });
        }
        report.trace.push(EpochMetrics { epoch, train_mae, val_mae });
    }
    Ok(report)
}
