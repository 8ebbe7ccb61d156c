//! Mini-batch Adam training and evaluation for any [`HybridModel`].

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{adam_step, softmax_cross_entropy, AdamState};
use crate::data::Dataset;
use crate::error::{HqnnError, Result};
use crate::models::{argmax, HybridModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub class_list: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 0,
            train_per_class: 500,
            test_per_class: 100,
            class_list: vec![0, 1],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(HqnnError::config("batch_size and per-class counts must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(HqnnError::config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.class_list.is_empty() {
            return Err(HqnnError::config("class_list is empty"));
        }
        let mut sorted = self.class_list.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.class_list.len() {
            return Err(HqnnError::config("class_list contains duplicates"));
        }
        Ok(())
    }
}

/// One row of training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
}

/// Per-group Adam moments; `None` for frozen groups.
pub struct Optimizer {
    states: Vec<Option<AdamState>>,
}

impl Optimizer {
    pub fn new<M: HybridModel + ?Sized>(model: &M, learning_rate: f64) -> Self {
        Optimizer {
            states: model
                .param_groups()
                .iter()
                .map(|g| (!g.frozen).then(|| AdamState::new(g.len, learning_rate)))
                .collect(),
        }
    }
}

/// Outcome of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub mean_loss: f64,
    pub correct: usize,
}

/// Averages per-sample gradients over `indices` (summed in index order) and
/// applies one Adam step to every trainable group.
pub fn backward_and_step<M: HybridModel + ?Sized>(
    model: &mut M,
    data: &Dataset,
    indices: &[usize],
    optimizer: &mut Optimizer,
) -> Result<BatchResult> {
    if indices.is_empty() {
        return Err(HqnnError::config("empty batch"));
    }
    let groups = model.param_groups();
    let mut sums: Vec<Vec<f64>> = groups.iter().map(|g| if g.frozen { Vec::new() } else { vec![0.0; g.len] }).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for &i in indices {
        let label = data.label(i);
        let sample = model.sample_gradient(data.image(i), label).map_err(|e| with_sample(e, i))?;
        if !sample.loss.is_finite() {
            return Err(HqnnError::Training(format!("non-finite loss {} at sample {i}", sample.loss)));
        }
        loss_sum += sample.loss;
        correct += usize::from(argmax(&sample.logits) == label);
        for (sum, grad) in sums.iter_mut().zip(&sample.grads) {
            for (s, g) in sum.iter_mut().zip(grad) {
                *s += g;
            }
        }
    }
    let scale = 1.0 / indices.len() as f64;
    for (g, (sum, state)) in sums.iter_mut().zip(optimizer.states.iter_mut()).enumerate() {
        if let Some(state) = state {
            sum.iter_mut().for_each(|v| *v *= scale);
            adam_step(model.group_values_mut(g), sum, state)
                .map_err(|e| HqnnError::Training(format!("group {}: {e}", groups[g].name)))?;
        }
    }
    Ok(BatchResult { mean_loss: loss_sum * scale, correct })
}

fn with_sample(e: HqnnError, index: usize) -> HqnnError {
    match e {
        HqnnError::Encoding(msg) => HqnnError::Encoding(format!("sample {index}: {msg}")),
        other => other,
    }
}

fn in_epoch(e: HqnnError, epoch: usize, stage: &str) -> HqnnError {
    match e {
        HqnnError::Training(msg) => HqnnError::Training(format!("epoch {epoch} {stage}: {msg}")),
        HqnnError::Encoding(msg) => HqnnError::Encoding(format!("epoch {epoch} {stage}: {msg}")),
        other => other,
    }
}

/// Mean cross-entropy and accuracy over `data`.
pub fn evaluate<M: HybridModel + ?Sized>(model: &M, data: &Dataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(HqnnError::config("cannot evaluate on an empty dataset"));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let label = data.label(i);
        let logits = model.forward(data.image(i)).map_err(|e| with_sample(e, i))?;
        loss += softmax_cross_entropy(&logits, label)?.0;
        correct += usize::from(argmax(&logits) == label);
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains for `config.epochs` epochs, calling `on_epoch` after each one.
///
/// Each epoch visits the training set in an order drawn from `(seed, epoch)`.
/// Training metrics are running averages over the epoch; test metrics are
/// measured after the last step.
pub fn fit<M: HybridModel + ?Sized>(
    model: &mut M,
    train: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&MetricsRecord),
) -> Result<Vec<MetricsRecord>> {
    config.validate()?;
    if train.is_empty() {
        return Err(HqnnError::config("training set is empty"));
    }
    let mut optimizer = Optimizer::new(model, config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(config.batch_size) {
            let result =
                backward_and_step(model, train, batch, &mut optimizer).map_err(|e| in_epoch(e, epoch, "training"))?;
            loss_sum += result.mean_loss * batch.len() as f64;
            correct += result.correct;
        }
        let (test_loss, test_accuracy) = evaluate(model, test).map_err(|e| in_epoch(e, epoch, "test evaluation"))?;
        let record = MetricsRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            test_loss,
            test_accuracy,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(history)
}
