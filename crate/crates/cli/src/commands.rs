use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hqnn_core::data::{filter_classes, load_split, subset_balanced, Split};
use hqnn_core::models::{
    evaluate, fit, grad_variance_diagnostic, pretrain_and_transfer, CnnModel, ConvStackConfig, GroupVariance,
    HybridModel,
};
use hqnn_core::{CnnQnnModel, Dataset, HqnnError, MetricsRecord, ModelFile, PcaQnnModel};

use crate::config::{ExperimentConfig, ModelKind};
use crate::metrics::MetricsWriter;
use crate::CliError;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub library_version: String,
    pub relabel_map: Vec<usize>,
    pub model: ModelFile,
}

/// Paths of everything `train` wrote.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub model: PathBuf,
    pub manifest: PathBuf,
    pub history: Vec<MetricsRecord>,
}

/// Balanced, relabelled train and test subsets for `config`.
pub fn load_data(config: &ExperimentConfig) -> Result<(Dataset, Dataset), CliError> {
    let dir = config.dataset_dir();
    let prepare = |split, per_class| -> Result<Dataset, CliError> {
        let full = load_split(&dir, split)?;
        Ok(subset_balanced(&filter_classes(&full, &config.classes)?, per_class, config.seed)?)
    };
    Ok((prepare(Split::Train, config.train_per_class)?, prepare(Split::Test, config.test_per_class)?))
}

fn output_dir(config: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: set `output_dir` or pass --out".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents).map_err(|e| CliError::io(path, e))
}

/// Trains the configured model and writes `metrics.csv`, `model.json` and
/// `manifest.toml` into the output directory. Transfer runs also write
/// `pretrain_metrics.csv`.
pub fn cmd_train(config: &ExperimentConfig, out: Option<&Path>) -> Result<TrainOutputs, CliError> {
    let dir = output_dir(config, out)?;
    let (train, test) = load_data(config)?;
    let relabel_map = train.class_map.clone();
    let manifest = dir.join("manifest.toml");
    let mut resolved = config.resolved(relabel_map.clone());
    resolved.output_dir = Some(std::path::absolute(&dir).unwrap_or_else(|_| dir.clone()));
    write_file(&manifest, resolved.to_toml().as_bytes())?;

    let n_classes = config.classes.len();
    let metrics = dir.join("metrics.csv");

    let (model, history) = match config.model {
        ModelKind::PcaQnn => {
            let mut m = PcaQnnModel::new(config.pca_dim(), config.ansatz(), config.readout(), n_classes, config.seed)?;
            m.fit_preprocessing(&train)?;
            let h = run_fit(&mut m, &train, &test, config, &metrics)?;
            (ModelFile::PcaQnn(m), h)
        }
        ModelKind::CnnQnn => {
            let mut m = CnnQnnModel::new(config.cnn_qnn_config(n_classes), config.seed)?;
            let h = run_fit(&mut m, &train, &test, config, &metrics)?;
            (ModelFile::CnnQnn(m), h)
        }
        ModelKind::CnnBaseline => {
            let mut m = CnnModel::new(ConvStackConfig::mnist(), 1 << config.qubits(), n_classes, config.seed)?;
            let h = run_fit(&mut m, &train, &test, config, &metrics)?;
            (ModelFile::Cnn(m), h)
        }
        ModelKind::CnnQnnTransfer => {
            let mut cnn = CnnModel::new(ConvStackConfig::mnist(), 1 << config.qubits(), n_classes, config.seed)?;
            let pre_config = ExperimentConfig { epochs: config.pretrain_epochs(), ..config.clone() };
            run_fit(&mut cnn, &train, &test, &pre_config, &dir.join("pretrain_metrics.csv"))?;
            let mut m = pretrain_and_transfer(&cnn, &config.cnn_qnn_config(n_classes), config.seed)?;
            let h = run_fit(&mut m, &train, &test, config, &metrics)?;
            (ModelFile::CnnQnn(m), h)
        }
    };

    let saved = SavedModel {
        format_version: MODEL_FORMAT_VERSION,
        library_version: hqnn_core::VERSION.to_string(),
        relabel_map,
        model,
    };
    let model_path = dir.join("model.json");
    let json = serde_json::to_vec(&saved).map_err(|e| CliError::Data(format!("serializing model: {e}")))?;
    write_file(&model_path, &json)?;
    Ok(TrainOutputs { dir, metrics, model: model_path, manifest, history })
}

fn run_fit<M: HybridModel>(
    model: &mut M,
    train: &Dataset,
    test: &Dataset,
    config: &ExperimentConfig,
    metrics_path: &Path,
) -> Result<Vec<MetricsRecord>, CliError> {
    let mut writer = MetricsWriter::create(metrics_path)?;
    let mut write_error = None;
    let result = fit(model, train, test, &config.train_config(), |record| {
        if write_error.is_none() {
            write_error = writer.append(record).err();
        }
    });
    if let Some(e) = write_error {
        return Err(CliError::io(metrics_path, e));
    }
    Ok(result?)
}

/// Loads a saved model, checking format version, library version and that its
/// architecture matches `config`.
pub fn load_model(path: &Path, config: &ExperimentConfig) -> Result<SavedModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let saved: SavedModel = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: not a model file: {e}", path.display())))?;
    if saved.format_version != MODEL_FORMAT_VERSION {
        return Err(CliError::Config(format!(
            "{}: model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            path.display(),
            saved.format_version
        )));
    }
    if saved.library_version != hqnn_core::VERSION {
        return Err(CliError::Config(format!(
            "{}: written by library version {}, this is {}",
            path.display(),
            saved.library_version,
            hqnn_core::VERSION
        )));
    }
    let expected = config.model.architecture();
    if saved.model.architecture() != expected {
        return Err(CliError::Config(format!(
            "{}: model architecture `{}` does not match config model `{}`",
            path.display(),
            saved.model.architecture(),
            config.model.name()
        )));
    }
    if saved.relabel_map != config.classes_sorted() {
        return Err(CliError::Config(format!(
            "{}: model was trained on classes {:?}, config lists {:?}",
            path.display(),
            saved.relabel_map,
            config.classes
        )));
    }
    Ok(saved)
}

/// Test-split loss and accuracy of a saved model, formatted as in `metrics.csv`.
pub fn cmd_eval(model_path: &Path, config: &ExperimentConfig) -> Result<(f64, f64), CliError> {
    let saved = load_model(model_path, config)?;
    let (_, test) = load_data(config)?;
    Ok(evaluate(saved.model.as_model(), &test)?)
}

pub fn format_eval(loss: f64, accuracy: f64) -> String {
    format!("test_loss {loss:.8}\ntest_acc {accuracy:.6}")
}

/// One `gradvar.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVarRow {
    pub classes: Vec<usize>,
    pub stats: GroupVariance,
}

pub const GRADVAR_HEADER: &str = "n_classes,classes,group,n_params,mean_abs_grad,variance";

/// Gradient statistics over `n_inits` circuit initializations for every class
/// list in `gradvar_classes`, plus a zero-readout control for each.
pub fn cmd_gradvar(
    config: &ExperimentConfig,
    n_inits: usize,
    out: Option<&Path>,
) -> Result<(PathBuf, Vec<GradVarRow>), CliError> {
    if !matches!(config.model, ModelKind::PcaQnn | ModelKind::CnnQnn) {
        return Err(CliError::Config(format!(
            "gradvar needs a model with a trainable circuit, got `{}`",
            config.model.name()
        )));
    }
    let dir = output_dir(config, out)?;
    let mut rows = Vec::new();
    for classes in config.gradvar_classes() {
        let sub = ExperimentConfig { classes: classes.clone(), ..config.clone() };
        let (train, _) = load_data(&sub)?;
        let take: Vec<usize> = (0..config.gradvar_batch().min(train.len())).collect();
        let batch = train.select(&take)?;
        let (stats, control) = match config.model {
            ModelKind::PcaQnn => {
                let mut m = PcaQnnModel::new(sub.pca_dim(), sub.ansatz(), sub.readout(), classes.len(), sub.seed)?;
                m.fit_preprocessing(&train)?;
                (
                    grad_variance_diagnostic(&m, n_inits, &batch, sub.seed)?,
                    grad_variance_diagnostic(&m.with_zero_readout(), n_inits, &batch, sub.seed)?,
                )
            }
            _ => {
                let m = CnnQnnModel::new(sub.cnn_qnn_config(classes.len()), sub.seed)?;
                (
                    grad_variance_diagnostic(&m, n_inits, &batch, sub.seed)?,
                    grad_variance_diagnostic(&m.with_zero_readout(), n_inits, &batch, sub.seed)?,
                )
            }
        };
        let block_rows = |s: &GroupVariance| s.group.starts_with("layer_") || s.group == "final_rotation";
        rows.extend(stats.into_iter().map(|stats| GradVarRow { classes: classes.clone(), stats }));
        rows.extend(control.into_iter().filter(block_rows).map(|mut stats| {
            stats.group = format!("zero_readout_control:{}", stats.group);
            GradVarRow { classes: classes.clone(), stats }
        }));
    }
    let path = dir.join("gradvar.csv");
    let mut text = format!("{GRADVAR_HEADER}\n");
    for r in &rows {
        let classes: Vec<String> = r.classes.iter().map(usize::to_string).collect();
        text.push_str(&format!(
            "{},{},{},{},{:.6e},{:.6e}\n",
            r.classes.len(),
            classes.join(" "),
            r.stats.group,
            r.stats.n_params,
            r.stats.mean_abs_grad,
            r.stats.variance
        ));
    }
    write_file(&path, text.as_bytes())?;
    Ok((path, rows))
}

impl From<HqnnError> for CliError {
    fn from(e: HqnnError) -> Self {
        match e {
            HqnnError::Config(_) => CliError::Config(e.to_string()),
            ref d if d.is_data_error() => CliError::Data(e.to_string()),
            _ => CliError::Training(e.to_string()),
        }
    }
}
