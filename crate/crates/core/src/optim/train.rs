use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::network::{NetworkGrads, NetworkModel};
use crate::corpus::EncodedInstance;
use crate::error::{Error, Result};
use crate::frontnet::DropoutSpec;
use crate::seed::{derive, rng_for, splitmix64, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Root seed for shuffling and dropout masks.
    pub seed: u64,
    /// Compute per-instance gradients of a batch on the rayon pool. The
    /// result is identical either way.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 2, batch_size: 32, learning_rate: 0.001, seed: 0, parallel: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    /// Mean training loss of each epoch.
    pub history: Vec<f64>,
}

/// Seed of the dropout mask for the `n`-th instance visit of a run.
fn dropout_seed(root: u64, n: u64) -> u64 {
    splitmix64(derive(root, Purpose::Dropout) ^ n)
}

/// Mean loss and mean gradient of one batch.
pub fn batch_gradient(
    model: &NetworkModel,
    batch: &[&EncodedInstance],
    seeds: &[u64],
    parallel: bool,
) -> Result<(f64, NetworkGrads)> {
    let rate = model.spec.dropout;
    let one = |(inst, seed): (&&EncodedInstance, &u64)| model.loss_and_grad(inst, &DropoutSpec::train(rate, *seed));
    let parts: Vec<(f64, NetworkGrads)> = if parallel {
        batch.par_iter().zip(seeds.par_iter()).map(one).collect::<Result<_>>()?
    } else {
        batch.iter().zip(seeds.iter()).map(one).collect::<Result<_>>()?
    };
    let mut total = NetworkGrads::zeros(model);
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.merge(g);
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    Ok((loss * scale, total))
}

/// Mini-batch Adam on the cross-entropy of the dense head.
pub fn train(mut model: NetworkModel, data: &[EncodedInstance], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let shapes: Vec<usize> = model.trainable_tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState::new(AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() }, shapes);
    let mut shuffle_rng = rng_for(cfg.seed, Purpose::Shuffle);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut visits = 0u64;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedInstance> = chunk.iter().map(|&i| &data[i]).collect();
            let seeds: Vec<u64> = (0..batch.len() as u64).map(|k| dropout_seed(cfg.seed, visits + k)).collect();
            visits += batch.len() as u64;
            let (loss, grads) = batch_gradient(&model, &batch, &seeds, cfg.parallel)?;
            epoch_loss += loss * batch.len() as f64;
            let dense = model.dense_gradients(&grads);
            adam.step(&mut model.trainable_tensors_mut(), &dense)?;
        }
        let mean = epoch_loss / data.len() as f64;
        log::debug!("epoch {} loss {:.6}", epoch + 1, mean);
        history.push(mean);
    }
    Ok(TrainOutcome { model, history })
}

/// Fraction of instances the dense head classifies correctly.
pub fn accuracy(model: &NetworkModel, data: &[EncodedInstance]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = data
        .par_iter()
        .map(|inst| model.predict(inst).map(|p| (p == inst.label) as usize))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}
