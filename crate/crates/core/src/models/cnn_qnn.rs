use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{relu_in_place, relu_mask, softmax_cross_entropy};
use crate::encoding::{amplitude_encode, EncoderSpec};
use crate::error::{HqnnError, Result};
use crate::models::{
    check_label, random_angles, ConvStack, ConvStackConfig, Dense, HybridModel, ParamGroup, SampleGradient,
};
use crate::pqc::{AnsatzSpec, CircuitTemplate};
use crate::qgrad::{input_vjp, normalize_vjp, param_shift_vjp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnQnnConfig {
    pub conv: ConvStackConfig,
    pub qubits: usize,
    pub ansatz: AnsatzSpec,
    pub n_classes: usize,
}

impl CnnQnnConfig {
    /// MNIST conv stack, 8 qubits, composite-U ansatz with two entangling layers.
    pub fn mnist(n_classes: usize) -> Self {
        CnnQnnConfig { conv: ConvStackConfig::mnist(), qubits: 8, ansatz: AnsatzSpec::proposed(2), n_classes }
    }
}

/// Conv stack → dense bridge to `2^q` + ReLU → amplitude encoding → ansatz →
/// per-qubit `<Z>` → dense head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnQnnModel {
    pub config: CnnQnnConfig,
    pub stack: ConvStack,
    pub bridge: Dense,
    pub template: CircuitTemplate,
    pub theta: Vec<f64>,
    pub head: Dense,
    pub frozen_conv: bool,
}

struct Forward {
    features: Vec<f64>,
    bridge_pre: Vec<f64>,
    bridge_out: Vec<f64>,
    state: crate::statevec::Statevector,
    expectations: Vec<f64>,
    logits: Vec<f64>,
}

impl CnnQnnModel {
    pub fn new(config: CnnQnnConfig, seed: u64) -> Result<Self> {
        if config.n_classes < 2 {
            return Err(HqnnError::config("a classifier needs at least two classes"));
        }
        let template = config.ansatz.build(config.qubits)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stack = ConvStack::init(config.conv, &mut rng)?;
        let bridge = Dense::init(stack.output_dim(), 1 << config.qubits, &mut rng);
        let theta = random_angles(template.n_params(), &mut rng);
        let head = Dense::init(config.qubits, config.n_classes, &mut rng);
        Ok(CnnQnnModel { config, stack, bridge, template, theta, head, frozen_conv: false })
    }

    pub fn encoder(&self) -> EncoderSpec {
        EncoderSpec::amplitude(self.config.qubits)
    }

    /// Runs the conv stack and bridge only; this is the vector that gets amplitude-encoded.
    pub fn bridge_output(&self, image: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.bridge.forward(&self.stack.forward(image)?)?;
        relu_in_place(&mut h);
        Ok(h)
    }

    /// Copy with an all-zero head, so the loss does not depend on the circuit angles.
    pub fn with_zero_readout(&self) -> Self {
        CnnQnnModel { head: Dense::zeros(self.config.qubits, self.config.n_classes), ..self.clone() }
    }

    fn run(&self, features: Vec<f64>) -> Result<Forward> {
        let bridge_pre = self.bridge.forward(&features)?;
        let mut bridge_out = bridge_pre.clone();
        relu_in_place(&mut bridge_out);
        let state = amplitude_encode(&bridge_out, &self.encoder()).map_err(|e| match e {
            HqnnError::Encoding(msg) => {
                HqnnError::Encoding(format!("bridge output cannot be encoded ({msg}); every ReLU unit is inactive"))
            }
            other => other,
        })?;
        let expectations = state.apply_circuit(&self.template, &self.theta)?.z_expectations();
        let logits = self.head.forward(&expectations)?;
        Ok(Forward { features, bridge_pre, bridge_out, state, expectations, logits })
    }
}

impl HybridModel for CnnQnnModel {
    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn forward(&self, image: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(self.stack.forward(image)?)?.logits)
    }

    fn sample_gradient(&self, image: &[f64], label: usize) -> Result<SampleGradient> {
        check_label(label, self.n_classes())?;
        let (features, cache) = self.stack.forward_cached(image)?;
        let fw = self.run(features)?;
        let (loss, d_logits) = softmax_cross_entropy(&fw.logits, label)?;
        let (d_expect, d_head_w, d_head_b) = self.head.backward(&d_logits, &fw.expectations)?;
        let d_theta = param_shift_vjp(&self.template, &self.theta, &fw.state, &d_expect)?;
        let d_amps = input_vjp(&self.template, &self.theta, &fw.state, &d_expect)?;
        let mut d_bridge = normalize_vjp(&fw.bridge_out, &d_amps[..fw.bridge_out.len()])?;
        relu_mask(&mut d_bridge, &fw.bridge_pre);
        let (d_features, d_bridge_w, d_bridge_b) = self.bridge.backward(&d_bridge, &fw.features)?;
        let conv_grads =
            if self.frozen_conv { Default::default() } else { self.stack.backward(&cache, &d_features)? };
        let mut grads: Vec<Vec<f64>> = conv_grads.into();
        grads.extend([d_bridge_w, d_bridge_b, d_theta, d_head_w, d_head_b]);
        Ok(SampleGradient { loss, logits: fw.logits, grads })
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        let mut groups = self.stack.groups(self.frozen_conv).to_vec();
        groups.extend([
            ParamGroup { name: "bridge_weights", len: self.bridge.weights.len(), frozen: false },
            ParamGroup { name: "bridge_bias", len: self.bridge.bias.len(), frozen: false },
            ParamGroup { name: "theta", len: self.theta.len(), frozen: false },
            ParamGroup { name: "head_weights", len: self.head.weights.len(), frozen: false },
            ParamGroup { name: "head_bias", len: self.head.bias.len(), frozen: false },
        ]);
        groups
    }

    fn group_values(&self, group: usize) -> &[f64] {
        match group {
            0..=3 => self.stack.group(group),
            4 => self.bridge.weights.data(),
            5 => &self.bridge.bias,
            6 => &self.theta,
            7 => self.head.weights.data(),
            8 => &self.head.bias,
            _ => panic!("CNN-QNN model has no parameter group {group}"),
        }
    }

    fn group_values_mut(&mut self, group: usize) -> &mut [f64] {
        match group {
            0..=3 => self.stack.group_mut(group),
            4 => self.bridge.weights.data_mut(),
            5 => &mut self.bridge.bias,
            6 => &mut self.theta,
            7 => self.head.weights.data_mut(),
            8 => &mut self.head.bias,
            _ => panic!("CNN-QNN model has no parameter group {group}"),
        }
    }

    fn circuit(&self) -> Option<(usize, &CircuitTemplate)> {
        Some((6, &self.template))
    }

    fn reinit_theta(&mut self, rng: &mut dyn RngCore) {
        self.theta = random_angles(self.theta.len(), rng);
    }
}
