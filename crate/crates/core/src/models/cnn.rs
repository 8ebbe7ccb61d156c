use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{
    conv2d_backward, conv2d_forward, crop_to_even, crop_to_even_backward, maxpool2x2_backward, maxpool2x2_forward,
    relu_backward, relu_forward, relu_in_place, relu_mask, softmax_cross_entropy, Tensor,
};
use crate::error::{HqnnError, Result};
use crate::models::{check_label, CnnQnnConfig, CnnQnnModel, Dense, HybridModel, ParamGroup, SampleGradient};

/// Two blocks of (conv k×k, ReLU, 2×2 max-pool) over a single-channel image.
/// Odd feature maps lose their last row/column before pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStackConfig {
    pub input_hw: (usize, usize),
    pub channels: [usize; 2],
    pub kernel: usize,
}

impl ConvStackConfig {
    /// 28×28 input, 3×3 kernels, channels 1→8→16, giving 16·5·5 = 400 features.
    pub fn mnist() -> Self {
        ConvStackConfig { input_hw: (28, 28), channels: [8, 16], kernel: 3 }
    }

    fn block_out(size: usize, k: usize) -> Option<usize> {
        let conv = size.checked_sub(k)? + 1;
        let pooled = conv / 2;
        (pooled > 0).then_some(pooled)
    }

    /// `(channels, height, width)` after the second pooling.
    pub fn output_shape(&self) -> Result<[usize; 3]> {
        let (h, w) = self.input_hw;
        let k = self.kernel;
        let shrink = |s| Self::block_out(s, k).and_then(|s| Self::block_out(s, k));
        match (shrink(h), shrink(w)) {
            (Some(oh), Some(ow)) if k > 0 && self.channels.iter().all(|&c| c > 0) => Ok([self.channels[1], oh, ow]),
            _ => Err(HqnnError::config(format!("a {h}x{w} input cannot pass two {k}x{k} conv/pool blocks"))),
        }
    }

    pub fn output_dim(&self) -> Result<usize> {
        Ok(self.output_shape()?.iter().product())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvStack {
    pub config: ConvStackConfig,
    pub conv1_kernels: Tensor,
    pub conv1_bias: Vec<f64>,
    pub conv2_kernels: Tensor,
    pub conv2_bias: Vec<f64>,
}

/// Intermediate maps kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvStackCache {
    input: Tensor,
    pre1: Tensor,
    crop1_shape: Vec<usize>,
    argmax1: Vec<usize>,
    pooled1: Tensor,
    pre2: Tensor,
    crop2_shape: Vec<usize>,
    argmax2: Vec<usize>,
}

impl ConvStack {
    /// Kernels and biases uniform on `±√(1/fan_in)`, `fan_in = c_in·k·k`.
    pub fn init(config: ConvStackConfig, rng: &mut impl Rng) -> Result<Self> {
        config.output_shape()?;
        let k = config.kernel;
        let [c1, c2] = config.channels;
        let mut draw = |shape: &[usize], fan_in: usize| {
            let bound = (1.0 / fan_in as f64).sqrt();
            Tensor::from_fn(shape, |_| rng.random_range(-bound..bound))
        };
        let conv1_kernels = draw(&[c1, 1, k, k], k * k);
        let conv1_bias = draw(&[c1], k * k).into_data();
        let conv2_kernels = draw(&[c2, c1, k, k], c1 * k * k);
        let conv2_bias = draw(&[c2], c1 * k * k).into_data();
        Ok(ConvStack { config, conv1_kernels, conv1_bias, conv2_kernels, conv2_bias })
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim().expect("validated at construction")
    }

    /// Flattened features of one image.
    pub fn forward(&self, image: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(image)?.0)
    }

    pub fn forward_cached(&self, image: &[f64]) -> Result<(Vec<f64>, ConvStackCache)> {
        let (h, w) = self.config.input_hw;
        if image.len() != h * w {
            return Err(HqnnError::structural(format!(
                "conv stack expects {h}x{w} = {} pixels, got {}",
                h * w,
                image.len()
            )));
        }
        let input = Tensor::new(vec![1, h, w], image.to_vec())?;
        let pre1 = conv2d_forward(&input, &self.conv1_kernels, &self.conv1_bias)?;
        let act1 = relu_forward(&pre1);
        let crop1 = crop_to_even(&act1)?;
        let (pooled1, argmax1) = maxpool2x2_forward(&crop1)?;
        let pre2 = conv2d_forward(&pooled1, &self.conv2_kernels, &self.conv2_bias)?;
        let act2 = relu_forward(&pre2);
        let crop2 = crop_to_even(&act2)?;
        let (pooled2, argmax2) = maxpool2x2_forward(&crop2)?;
        let cache = ConvStackCache {
            input,
            pre1,
            crop1_shape: crop1.shape().to_vec(),
            argmax1,
            pooled1,
            pre2,
            crop2_shape: crop2.shape().to_vec(),
            argmax2,
        };
        Ok((pooled2.into_data(), cache))
    }

    /// Gradients `[conv1_kernels, conv1_bias, conv2_kernels, conv2_bias]`.
    pub fn backward(&self, cache: &ConvStackCache, d_features: &[f64]) -> Result<[Vec<f64>; 4]> {
        let out_shape = self.config.output_shape()?;
        let d_pool2 = Tensor::new(out_shape.to_vec(), d_features.to_vec())?;
        let d_crop2 = maxpool2x2_backward(&d_pool2, &cache.argmax2, &cache.crop2_shape)?;
        let d_act2 = crop_to_even_backward(&d_crop2, cache.pre2.shape())?;
        let d_pre2 = relu_backward(&d_act2, &cache.pre2)?;
        let (d_pooled1, dk2, db2) = conv2d_backward(&d_pre2, &cache.pooled1, &self.conv2_kernels)?;
        let d_crop1 = maxpool2x2_backward(&d_pooled1, &cache.argmax1, &cache.crop1_shape)?;
        let d_act1 = crop_to_even_backward(&d_crop1, cache.pre1.shape())?;
        let d_pre1 = relu_backward(&d_act1, &cache.pre1)?;
        let (_, dk1, db1) = conv2d_backward(&d_pre1, &cache.input, &self.conv1_kernels)?;
        Ok([dk1.into_data(), db1, dk2.into_data(), db2])
    }

    pub(crate) fn group(&self, i: usize) -> &[f64] {
        match i {
            0 => self.conv1_kernels.data(),
            1 => &self.conv1_bias,
            2 => self.conv2_kernels.data(),
            3 => &self.conv2_bias,
            _ => unreachable!(),
        }
    }

    pub(crate) fn group_mut(&mut self, i: usize) -> &mut [f64] {
        match i {
            0 => self.conv1_kernels.data_mut(),
            1 => &mut self.conv1_bias,
            2 => self.conv2_kernels.data_mut(),
            3 => &mut self.conv2_bias,
            _ => unreachable!(),
        }
    }

    pub(crate) fn groups(&self, frozen: bool) -> [ParamGroup; 4] {
        [
            ParamGroup { name: "conv1_kernels", len: self.conv1_kernels.len(), frozen },
            ParamGroup { name: "conv1_bias", len: self.conv1_bias.len(), frozen },
            ParamGroup { name: "conv2_kernels", len: self.conv2_kernels.len(), frozen },
            ParamGroup { name: "conv2_bias", len: self.conv2_bias.len(), frozen },
        ]
    }
}

/// Plain CNN: conv stack → dense (hidden) + ReLU → dense classifier.
/// Used as the pretraining model for transfer learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub stack: ConvStack,
    pub hidden: Dense,
    pub classifier: Dense,
}

impl CnnModel {
    pub fn new(config: ConvStackConfig, hidden_dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        if n_classes < 2 {
            return Err(HqnnError::config("a classifier needs at least two classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stack = ConvStack::init(config, &mut rng)?;
        let hidden = Dense::init(stack.output_dim(), hidden_dim, &mut rng);
        let classifier = Dense::init(hidden_dim, n_classes, &mut rng);
        Ok(CnnModel { stack, hidden, classifier })
    }
}

impl HybridModel for CnnModel {
    fn n_classes(&self) -> usize {
        self.classifier.out_dim()
    }

    fn forward(&self, image: &[f64]) -> Result<Vec<f64>> {
        let features = self.stack.forward(image)?;
        let mut h = self.hidden.forward(&features)?;
        relu_in_place(&mut h);
        self.classifier.forward(&h)
    }

    fn sample_gradient(&self, image: &[f64], label: usize) -> Result<SampleGradient> {
        check_label(label, self.n_classes())?;
        let (features, cache) = self.stack.forward_cached(image)?;
        let pre = self.hidden.forward(&features)?;
        let mut h = pre.clone();
        relu_in_place(&mut h);
        let logits = self.classifier.forward(&h)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, label)?;
        let (mut d_h, d_cw, d_cb) = self.classifier.backward(&d_logits, &h)?;
        relu_mask(&mut d_h, &pre);
        let (d_features, d_hw, d_hb) = self.hidden.backward(&d_h, &features)?;
        let [dk1, db1, dk2, db2] = self.stack.backward(&cache, &d_features)?;
        Ok(SampleGradient { loss, logits, grads: vec![dk1, db1, dk2, db2, d_hw, d_hb, d_cw, d_cb] })
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        let mut groups = self.stack.groups(false).to_vec();
        groups.extend([
            ParamGroup { name: "hidden_weights", len: self.hidden.weights.len(), frozen: false },
            ParamGroup { name: "hidden_bias", len: self.hidden.bias.len(), frozen: false },
            ParamGroup { name: "classifier_weights", len: self.classifier.weights.len(), frozen: false },
            ParamGroup { name: "classifier_bias", len: self.classifier.bias.len(), frozen: false },
        ]);
        groups
    }

    fn group_values(&self, group: usize) -> &[f64] {
        match group {
            0..=3 => self.stack.group(group),
            4 => self.hidden.weights.data(),
            5 => &self.hidden.bias,
            6 => self.classifier.weights.data(),
            7 => &self.classifier.bias,
            _ => panic!("CNN model has no parameter group {group}"),
        }
    }

    fn group_values_mut(&mut self, group: usize) -> &mut [f64] {
        match group {
            0..=3 => self.stack.group_mut(group),
            4 => self.hidden.weights.data_mut(),
            5 => &mut self.hidden.bias,
            6 => self.classifier.weights.data_mut(),
            7 => &mut self.classifier.bias,
            _ => panic!("CNN model has no parameter group {group}"),
        }
    }
}

/// Builds a CNN-QNN model whose conv stack is a frozen copy of `pretrained`'s.
/// The bridge, circuit angles and head are freshly initialized from `seed`.
pub fn pretrain_and_transfer(pretrained: &CnnModel, target: &CnnQnnConfig, seed: u64) -> Result<CnnQnnModel> {
    if pretrained.stack.config != target.conv {
        return Err(HqnnError::config(format!(
            "pretrained conv stack {:?} does not match target {:?}",
            pretrained.stack.config, target.conv
        )));
    }
    if pretrained.hidden.out_dim() != 1 << target.qubits {
        return Err(HqnnError::config(format!(
            "pretrained hidden width {} differs from the bridge width {}",
            pretrained.hidden.out_dim(),
            1usize << target.qubits
        )));
    }
    let mut model = CnnQnnModel::new(target.clone(), seed)?;
    model.stack = pretrained.stack.clone();
    model.frozen_conv = true;
    Ok(model)
}
