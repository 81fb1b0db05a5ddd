//! Mini-batch training with deterministic parallel gradient reduction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::graph::{Gradients, Graph, ParamStore, Tensor, Var};
use crate::error::TrainError;

/// A model whose loss on one example can be recorded onto a graph.
pub trait Trainable: Sync {
    type Example: Sync;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// Records the loss of `example` and returns its `1 x 1` node.
    fn loss(&self, g: &mut Graph, example: &Self::Example) -> Var;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 128,
            epochs: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(TrainError::Config(format!("learning rate {} is not a non-negative number", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,dev_loss\n");
        for e in &self.epochs {
            let dev = e.dev_loss.map(|d| d.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, dev));
        }
        out
    }
}

fn example_grad<M: Trainable>(model: &M, example: &M::Example) -> (f64, Gradients) {
    let mut g = Graph::new(model.params());
    let loss = model.loss(&mut g, example);
    (g.scalar(loss), g.backward(loss))
}

/// Mean loss over `examples` without parameter updates.
pub fn mean_loss<M: Trainable>(model: &M, examples: &[M::Example]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let mut g = Graph::new(model.params());
            let loss = model.loss(&mut g, ex);
            g.scalar(loss)
        })
        .collect();
    losses.iter().sum::<f64>() / examples.len() as f64
}

/// Gradient of the mean loss over `batch`. Per-example gradients are computed
/// in parallel and summed in example order, so the result does not depend on
/// thread scheduling.
pub fn batch_gradient<M: Trainable>(model: &M, batch: &[&M::Example]) -> (f64, Gradients) {
    let parts: Vec<(f64, Gradients)> = batch.par_iter().map(|ex| example_grad(model, ex)).collect();
    let mut total = model.params().zero_grads();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.accumulate(g);
    }
    let n = batch.len().max(1) as f64;
    total.scale(1.0 / n);
    (loss / n, total)
}

/// Trains with Adam, shuffling every epoch from `config.seed`. After each
/// epoch the dev loss is measured and the parameters with the lowest dev loss
/// (training loss when there is no dev data) are restored at the end.
pub fn train<M: Trainable>(
    model: &mut M,
    train_set: &[M::Example],
    dev_set: &[M::Example],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..Default::default()
        },
        model.params(),
    );
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&M::Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradient(model, &batch);
            if !loss.is_finite() || !grads.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: b, loss });
            }
            epoch_loss += loss * batch.len() as f64;
            adam.step(model.params_mut(), &grads);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let dev_loss = (!dev_set.is_empty()).then(|| mean_loss(model, dev_set));
        if let Some(d) = dev_loss.filter(|d| !d.is_finite()) {
            return Err(TrainError::NonFiniteLoss { epoch, batch: 0, loss: d });
        }
        let score = dev_loss.unwrap_or(train_loss);
        if best.as_ref().map_or(true, |(s, _, _)| score < *s) {
            best = Some((score, epoch, model.params().tensors().to_vec()));
        }
        let stats = EpochStats {
            epoch,
            train_loss,
            dev_loss,
        };
        on_epoch(&stats);
        epochs.push(stats);
    }

    let (_, best_epoch, tensors) = best.expect("at least one epoch");
    for (dst, src) in model.params_mut().tensors_mut().iter_mut().zip(tensors) {
        *dst = src;
    }
    Ok(TrainReport { epochs, best_epoch })
}
