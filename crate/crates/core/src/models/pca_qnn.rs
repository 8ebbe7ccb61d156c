use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::{pca_fit, pca_transform, softmax_cross_entropy, PcaModel};
use crate::data::Dataset;
use crate::encoding::{EncoderSpec, FeatureScaler};
use crate::error::{HqnnError, Result};
use crate::models::{check_label, random_angles, Dense, HybridModel, ParamGroup, SampleGradient};
use crate::pqc::{AnsatzSpec, CircuitTemplate};
use crate::qgrad::param_shift_vjp;
use crate::statevec::Statevector;

/// How qubit expectations become class logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Logit `c` is `<Z_c>`; needs `n_classes <= n_qubits`.
    Direct,
    /// A trainable dense layer maps all expectations to logits.
    Dense,
}

/// PCA → angle encoding (RY) → ansatz → per-qubit `<Z>` → readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaQnnModel {
    pub pca: Option<PcaModel>,
    pub scaler: Option<FeatureScaler>,
    pub encoder: EncoderSpec,
    pub ansatz: AnsatzSpec,
    pub template: CircuitTemplate,
    pub theta: Vec<f64>,
    pub readout: Readout,
    pub readout_layer: Option<Dense>,
    pub n_classes: usize,
}

impl PcaQnnModel {
    /// Unfitted model with freshly drawn circuit angles (and readout weights for `Dense`).
    pub fn new(n_qubits: usize, ansatz: AnsatzSpec, readout: Readout, n_classes: usize, seed: u64) -> Result<Self> {
        if n_classes < 2 {
            return Err(HqnnError::config("a classifier needs at least two classes"));
        }
        if readout == Readout::Direct && n_classes > n_qubits {
            return Err(HqnnError::config(format!(
                "direct readout of {n_classes} classes needs at least {n_classes} qubits, have {n_qubits}"
            )));
        }
        let template = ansatz.build(n_qubits)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_angles(template.n_params(), &mut rng);
        let readout_layer = match readout {
            Readout::Direct => None,
            Readout::Dense => Some(Dense::init(n_qubits, n_classes, &mut rng)),
        };
        Ok(PcaQnnModel {
            pca: None,
            scaler: None,
            encoder: EncoderSpec::angle(n_qubits),
            ansatz,
            template,
            theta,
            readout,
            readout_layer,
            n_classes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.template.n_qubits()
    }

    /// Fits PCA and the angle scaler on training images only.
    pub fn fit_preprocessing(&mut self, train: &Dataset) -> Result<()> {
        let d = train.pixels_per_image();
        let flat = train.images.clone().reshape(vec![train.len(), d])?;
        let pca = pca_fit(&flat, self.n_qubits())?;
        let projected = (0..train.len()).map(|i| pca_transform(&pca, train.image(i))).collect::<Result<Vec<_>>>()?;
        self.scaler = Some(FeatureScaler::fit(projected.iter().map(|r| r.as_slice()), self.encoder.scale_range)?);
        self.pca = Some(pca);
        Ok(())
    }

    /// Scaled rotation angles fed to the encoder.
    pub fn features(&self, image: &[f64]) -> Result<Vec<f64>> {
        let (pca, scaler) = match (&self.pca, &self.scaler) {
            (Some(p), Some(s)) => (p, s),
            _ => return Err(HqnnError::State("PCA and feature scaler have not been fitted".into())),
        };
        scaler.transform(&pca_transform(pca, image)?)
    }

    pub fn encoded_state(&self, image: &[f64]) -> Result<Statevector> {
        self.encoder.encode(&self.features(image)?)
    }

    /// Copy whose logits are a dense readout with all-zero weights, so the loss
    /// does not depend on the circuit angles.
    pub fn with_zero_readout(&self) -> Self {
        PcaQnnModel {
            readout: Readout::Dense,
            readout_layer: Some(Dense::zeros(self.n_qubits(), self.n_classes)),
            ..self.clone()
        }
    }

    fn logits_from_expectations(&self, expectations: &[f64]) -> Result<Vec<f64>> {
        match (&self.readout, &self.readout_layer) {
            (Readout::Direct, _) => Ok(expectations[..self.n_classes].to_vec()),
            (Readout::Dense, Some(layer)) => layer.forward(expectations),
            (Readout::Dense, None) => Err(HqnnError::State("dense readout has no weights".into())),
        }
    }
}

impl HybridModel for PcaQnnModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn forward(&self, image: &[f64]) -> Result<Vec<f64>> {
        let state = self.encoded_state(image)?;
        let expectations = state.apply_circuit(&self.template, &self.theta)?.z_expectations();
        self.logits_from_expectations(&expectations)
    }

    fn sample_gradient(&self, image: &[f64], label: usize) -> Result<SampleGradient> {
        check_label(label, self.n_classes)?;
        let state = self.encoded_state(image)?;
        let expectations = state.apply_circuit(&self.template, &self.theta)?.z_expectations();
        let logits = self.logits_from_expectations(&expectations)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, label)?;
        let mut grads = Vec::with_capacity(3);
        let d_expect = match &self.readout_layer {
            Some(layer) if self.readout == Readout::Dense => {
                let (dx, dw, db) = layer.backward(&d_logits, &expectations)?;
                grads.push(dw);
                grads.push(db);
                dx
            }
            _ => {
                let mut d = vec![0.0; self.n_qubits()];
                d[..self.n_classes].copy_from_slice(&d_logits);
                d
            }
        };
        grads.insert(0, param_shift_vjp(&self.template, &self.theta, &state, &d_expect)?);
        Ok(SampleGradient { loss, logits, grads })
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        let mut groups = vec![ParamGroup { name: "theta", len: self.theta.len(), frozen: false }];
        if let (Readout::Dense, Some(layer)) = (self.readout, &self.readout_layer) {
            groups.push(ParamGroup { name: "readout_weights", len: layer.weights.len(), frozen: false });
            groups.push(ParamGroup { name: "readout_bias", len: layer.bias.len(), frozen: false });
        }
        groups
    }

    fn group_values(&self, group: usize) -> &[f64] {
        match group {
            0 => &self.theta,
            1 => self.readout_layer.as_ref().expect("dense readout").weights.data(),
            2 => &self.readout_layer.as_ref().expect("dense readout").bias,
            _ => panic!("PCA-QNN model has no parameter group {group}"),
        }
    }

    fn group_values_mut(&mut self, group: usize) -> &mut [f64] {
        match group {
            0 => &mut self.theta,
            1 => self.readout_layer.as_mut().expect("dense readout").weights.data_mut(),
            2 => &mut self.readout_layer.as_mut().expect("dense readout").bias,
            _ => panic!("PCA-QNN model has no parameter group {group}"),
        }
    }

    fn circuit(&self) -> Option<(usize, &CircuitTemplate)> {
        Some((0, &self.template))
    }

    fn reinit_theta(&mut self, rng: &mut dyn RngCore) {
        self.theta = random_angles(self.theta.len(), rng);
    }
}
