//! Experiment configuration files.
//!
//! Configs are TOML. Unknown keys are rejected, and every override is checked
//! against the model kind it applies to. After a run the fully resolved config
//! is written back as `manifest.toml`, which can itself be used as a config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hqnn_core::models::{CnnQnnConfig, ConvStackConfig, TrainConfig};
use hqnn_core::pqc::{AnsatzSpec, EntanglementStrategy, EntanglerGate, RotationBlock};
use hqnn_core::Readout;

use crate::CliError;

pub const DATA_DIR_ENV: &str = "HQNN_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PcaQnn,
    CnnQnn,
    CnnQnnTransfer,
    CnnBaseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PcaQnn => "pca_qnn",
            ModelKind::CnnQnn => "cnn_qnn",
            ModelKind::CnnQnnTransfer => "cnn_qnn_transfer",
            ModelKind::CnnBaseline => "cnn_baseline",
        }
    }

    /// Architecture tag stored in the saved model file.
    pub fn architecture(self) -> &'static str {
        match self {
            ModelKind::PcaQnn => "pca_qnn",
            ModelKind::CnnQnn | ModelKind::CnnQnnTransfer => "cnn_qnn",
            ModelKind::CnnBaseline => "cnn",
        }
    }

    fn has_circuit(self) -> bool {
        self != ModelKind::CnnBaseline
    }

    fn uses_conv(self) -> bool {
        self != ModelKind::PcaQnn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Mnist,
    FashionMnist,
}

impl DatasetName {
    pub fn dir_name(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion_mnist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    /// RX·RY·RZ rotations with cyclic entanglers.
    Baseline,
    /// Composite RY·RZ·RY rotations with all-pairs entanglers.
    Proposed,
}

/// Provenance written into `manifest.toml`; ignored when a manifest is read back as a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub library_version: String,
    /// `relabel_map[i]` is the original dataset label of class index `i`.
    pub relabel_map: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub dataset: DatasetName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,

    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub classes: Vec<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<Readout>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<AnsatzKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entanglement: Option<EntanglementStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entangler_gate: Option<EntanglerGate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrain_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradvar_classes: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradvar_batch: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

fn default_learning_rate() -> f64 {
    0.01
}

fn default_batch_size() -> usize {
    32
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always representable in TOML")
    }

    /// Checks counts and that every override belongs to the configured model kind.
    pub fn validate(&self) -> Result<(), CliError> {
        self.train_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let kind = self.model;
        let misplaced = |key: &str, set: bool, allowed: bool| {
            if set && !allowed {
                Err(CliError::Config(format!("`{key}` does not apply to model `{}`", kind.name())))
            } else {
                Ok(())
            }
        };
        misplaced("pca_dim", self.pca_dim.is_some(), kind == ModelKind::PcaQnn)?;
        misplaced("readout", self.readout.is_some(), kind == ModelKind::PcaQnn)?;
        misplaced("n_layers", self.n_layers.is_some(), kind.has_circuit())?;
        misplaced("ansatz", self.ansatz.is_some(), kind.has_circuit())?;
        misplaced("entanglement", self.entanglement.is_some(), kind.has_circuit())?;
        misplaced("entangler_gate", self.entangler_gate.is_some(), kind.has_circuit())?;
        misplaced("qubits", self.qubits.is_some(), kind.uses_conv())?;
        misplaced("pretrain_epochs", self.pretrain_epochs.is_some(), kind == ModelKind::CnnQnnTransfer)?;
        let gradvar_ok = matches!(kind, ModelKind::PcaQnn | ModelKind::CnnQnn);
        misplaced("gradvar_classes", self.gradvar_classes.is_some(), gradvar_ok)?;
        misplaced("gradvar_batch", self.gradvar_batch.is_some(), gradvar_ok)?;

        if self.classes.len() < 2 {
            return Err(CliError::Config("`classes` needs at least two labels".into()));
        }
        if let Some(bad) = self.classes.iter().find(|&&c| c > 9) {
            return Err(CliError::Config(format!("`classes` entry {bad} is outside 0..=9")));
        }
        if self.pca_dim == Some(0) || self.qubits == Some(0) || self.n_layers == Some(0) {
            return Err(CliError::Config("`pca_dim`, `qubits` and `n_layers` must be positive".into()));
        }
        if self.qubits.is_some_and(|q| q > 16) {
            return Err(CliError::Config("`qubits` above 16 is not supported".into()));
        }
        if self.pca_dim.is_some_and(|d| d > 16) {
            return Err(CliError::Config("`pca_dim` above 16 is not supported".into()));
        }
        if self.readout() == Readout::Direct && kind == ModelKind::PcaQnn {
            let needed =
                self.gradvar_classes.iter().flatten().map(Vec::len).chain([self.classes.len()]).max().unwrap_or(0);
            if needed > self.pca_dim() {
                return Err(CliError::Config(format!(
                    "direct readout of {needed} classes needs `pca_dim` >= {needed}"
                )));
            }
        }
        if self.gradvar_batch == Some(0) {
            return Err(CliError::Config("`gradvar_batch` must be positive".into()));
        }
        for list in self.gradvar_classes.iter().flatten() {
            if list.len() < 2 {
                return Err(CliError::Config("every `gradvar_classes` entry needs two or more labels".into()));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            train_per_class: self.train_per_class,
            test_per_class: self.test_per_class,
            class_list: self.classes.clone(),
        }
    }

    /// Original labels in class-index order.
    pub fn classes_sorted(&self) -> Vec<usize> {
        let mut c = self.classes.clone();
        c.sort_unstable();
        c
    }

    pub fn pca_dim(&self) -> usize {
        self.pca_dim.unwrap_or(8)
    }

    pub fn readout(&self) -> Readout {
        self.readout.unwrap_or(Readout::Direct)
    }

    pub fn qubits(&self) -> usize {
        self.qubits.unwrap_or(8)
    }

    pub fn pretrain_epochs(&self) -> usize {
        self.pretrain_epochs.unwrap_or(self.epochs)
    }

    pub fn gradvar_batch(&self) -> usize {
        self.gradvar_batch.unwrap_or(self.batch_size)
    }

    pub fn gradvar_classes(&self) -> Vec<Vec<usize>> {
        self.gradvar_classes.clone().unwrap_or_else(|| vec![self.classes.clone()])
    }

    /// PCA models default to the baseline ansatz, CNN models to the proposed one.
    pub fn ansatz(&self) -> AnsatzSpec {
        let kind = self.ansatz.unwrap_or(match self.model {
            ModelKind::PcaQnn => AnsatzKind::Baseline,
            _ => AnsatzKind::Proposed,
        });
        let n_layers = self.n_layers.unwrap_or(2);
        let mut spec = match kind {
            AnsatzKind::Baseline => AnsatzSpec::baseline(n_layers),
            AnsatzKind::Proposed => AnsatzSpec::proposed(n_layers),
        };
        if let Some(e) = self.entanglement {
            spec.entanglement = e;
        }
        if let Some(g) = self.entangler_gate {
            spec.entangler = g;
        }
        spec
    }

    pub fn cnn_qnn_config(&self, n_classes: usize) -> CnnQnnConfig {
        CnnQnnConfig { conv: ConvStackConfig::mnist(), qubits: self.qubits(), ansatz: self.ansatz(), n_classes }
    }

    /// Explicit `data_dir`, then `$HQNN_DATA_DIR`, then `data/` at the workspace root.
    pub fn data_root(&self) -> PathBuf {
        if let Some(dir) = &self.data_dir {
            return dir.clone();
        }
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            return PathBuf::from(dir);
        }
        workspace_root().join("data")
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.data_root().join(self.dataset.dir_name())
    }

    /// Copy with every defaulted field written out, as stored in the manifest.
    pub fn resolved(&self, relabel_map: Vec<usize>) -> Self {
        let kind = self.model;
        let circuit = kind.has_circuit();
        let ansatz = self.ansatz();
        let rotation_kind = match ansatz.rotation {
            RotationBlock::Xyz => AnsatzKind::Baseline,
            RotationBlock::CompositeU => AnsatzKind::Proposed,
        };
        let gradvar = matches!(kind, ModelKind::PcaQnn | ModelKind::CnnQnn);
        ExperimentConfig {
            data_dir: Some(absolute(&self.data_root())),
            output_dir: self.output_dir.as_deref().map(absolute),
            pca_dim: (kind == ModelKind::PcaQnn).then(|| self.pca_dim()),
            readout: (kind == ModelKind::PcaQnn).then(|| self.readout()),
            qubits: kind.uses_conv().then(|| self.qubits()),
            n_layers: circuit.then_some(ansatz.n_layers),
            ansatz: circuit.then_some(rotation_kind),
            entanglement: circuit.then_some(ansatz.entanglement),
            entangler_gate: circuit.then_some(ansatz.entangler),
            pretrain_epochs: (kind == ModelKind::CnnQnnTransfer).then(|| self.pretrain_epochs()),
            gradvar_classes: gradvar.then(|| self.gradvar_classes()),
            gradvar_batch: gradvar.then(|| self.gradvar_batch()),
            manifest: Some(ManifestInfo { library_version: hqnn_core::VERSION.to_string(), relabel_map }),
            ..self.clone()
        }
    }
}

/// Directory holding the top-level `Cargo.toml` of this workspace.
pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("crate lives two levels below the workspace root")
        .to_path_buf()
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "pca_qnn"
dataset = "mnist"
epochs = 2
train_per_class = 10
test_per_class = 5
classes = [0, 1]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.pca_dim(), 8);
        assert_eq!(c.readout(), Readout::Direct);
        assert_eq!(c.ansatz(), AnsatzSpec::baseline(2));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ExperimentConfig::from_toml(&format!("{MINIMAL}epoch = 3\n")).unwrap_err();
        assert!(err.to_string().contains("epoch"), "{err}");
    }

    #[test]
    fn override_must_match_model_kind() {
        let err = ExperimentConfig::from_toml(&format!("{MINIMAL}qubits = 4\n")).unwrap_err();
        assert!(err.to_string().contains("qubits"), "{err}");
        let cnn = MINIMAL.replace("pca_qnn", "cnn_qnn");
        assert!(ExperimentConfig::from_toml(&format!("{cnn}pca_dim = 4\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{cnn}qubits = 4\n")).is_ok());
    }

    #[test]
    fn direct_readout_needs_enough_qubits() {
        let text = MINIMAL.replace("[0, 1]", "[0, 1, 2, 3, 4]") + "pca_dim = 4\n";
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn bad_counts_are_config_errors() {
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("classes = [0, 1]", "classes = []")).is_err());
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("[0, 1]", "[0, 0]")).is_err());
        assert!(ExperimentConfig::from_toml(&MINIMAL.replace("test_per_class = 5", "test_per_class = 0")).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let resolved = c.resolved(vec![0, 1]);
        let back = ExperimentConfig::from_toml(&resolved.to_toml()).unwrap();
        assert_eq!(back, resolved);
        assert_eq!(back.ansatz(), c.ansatz());
    }
}
