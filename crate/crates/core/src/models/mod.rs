//! Hybrid models, the shared training loop and the gradient-variance diagnostic.
//!
//! Every model exposes its parameters as an ordered list of flat groups
//! (kernels, biases, circuit angles, ...). The trainer keeps one Adam state
//! per group and skips groups the model reports as frozen.

mod cnn;
mod cnn_qnn;
mod diagnostic;
mod pca_qnn;
pub mod train;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::classical::{dense_backward, dense_forward, Tensor};
use crate::error::{HqnnError, Result};
use crate::pqc::CircuitTemplate;

pub use cnn::{pretrain_and_transfer, CnnModel, ConvStack, ConvStackCache, ConvStackConfig};
pub use cnn_qnn::{CnnQnnConfig, CnnQnnModel};
pub use diagnostic::{grad_variance_diagnostic, variance_summary, GroupVariance, MIN_INITS};
pub use pca_qnn::{PcaQnnModel, Readout};
pub use train::{backward_and_step, evaluate, fit, BatchResult, MetricsRecord, Optimizer, TrainConfig};

/// Description of one parameter group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: &'static str,
    pub len: usize,
    pub frozen: bool,
}

/// Loss, logits and per-group gradients for one sample. Frozen groups carry
/// an empty gradient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub loss: f64,
    pub logits: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

/// A classifier the generic trainer can drive.
pub trait HybridModel {
    fn n_classes(&self) -> usize;

    fn forward(&self, image: &[f64]) -> Result<Vec<f64>>;

    fn sample_gradient(&self, image: &[f64], label: usize) -> Result<SampleGradient>;

    fn param_groups(&self) -> Vec<ParamGroup>;

    fn group_values(&self, group: usize) -> &[f64];

    fn group_values_mut(&mut self, group: usize) -> &mut [f64];

    /// Index of the circuit-angle group and its template, when the model has one.
    fn circuit(&self) -> Option<(usize, &CircuitTemplate)> {
        None
    }

    /// Redraws the circuit angles (used by the gradient-variance diagnostic).
    fn reinit_theta(&mut self, _rng: &mut dyn RngCore) {}

    fn trainable_parameter_count(&self) -> usize {
        self.param_groups().iter().filter(|g| !g.frozen).map(|g| g.len).sum()
    }

    /// Every group concatenated, in group order.
    fn flat_parameters(&self) -> Vec<f64> {
        (0..self.param_groups().len()).flat_map(|g| self.group_values(g).to_vec()).collect()
    }
}

/// Fully connected layer with weights of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Weights and biases uniform on `±√(1/in_dim)`.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        Dense {
            weights: Tensor::from_fn(&[out_dim, in_dim], |_| rng.random_range(-bound..bound)),
            bias: (0..out_dim).map(|_| rng.random_range(-bound..bound)).collect(),
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense { weights: Tensor::zeros(&[out_dim, in_dim]), bias: vec![0.0; out_dim] }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        dense_forward(x, &self.weights, &self.bias)
    }

    /// Returns `(input_grad, weight_grad, bias_grad)`.
    pub fn backward(&self, upstream: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (dx, dw, db) = dense_backward(upstream, x, &self.weights)?;
        Ok((dx, dw.into_data(), db))
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_label(label: usize, n_classes: usize) -> Result<()> {
    if label >= n_classes {
        return Err(HqnnError::structural(format!("label {label} out of range for {n_classes} classes")));
    }
    Ok(())
}

/// Angles uniform on `[0, 2π)`.
pub(crate) fn random_angles(n: usize, rng: &mut (impl Rng + ?Sized)) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect()
}

/// Serialized form of any trained model, tagged by architecture.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum ModelFile {
    PcaQnn(PcaQnnModel),
    CnnQnn(CnnQnnModel),
    Cnn(CnnModel),
}

impl ModelFile {
    pub fn architecture(&self) -> &'static str {
        match self {
            ModelFile::PcaQnn(_) => "pca_qnn",
            ModelFile::CnnQnn(_) => "cnn_qnn",
            ModelFile::Cnn(_) => "cnn",
        }
    }

    pub fn as_model(&self) -> &dyn HybridModel {
        match self {
            ModelFile::PcaQnn(m) => m,
            ModelFile::CnnQnn(m) => m,
            ModelFile::Cnn(m) => m,
        }
    }
}
