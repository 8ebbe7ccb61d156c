//! Hybrid quantum-classical neural networks for image classification.
//!
//! The crate is organised bottom-up:
//!
//! * [`statevec`] dense statevector simulation and Z-basis readout,
//! * [`encoding`] angle and amplitude encoding of classical features,
//! * [`pqc`] parameterized circuit templates and entanglement patterns,
//! * [`qgrad`] parameter-shift and input-amplitude gradients,
//! * [`classical`] tensors, CNN layers, softmax cross-entropy, PCA and Adam,
//! * [`models`] the PCA+QNN and CNN+QNN hybrids, training and diagnostics,
//! * [`data`] IDX dataset loading, class filtering and balanced subsets.

pub mod classical;
pub mod data;
pub mod encoding;
pub mod error;
pub mod models;
pub mod pqc;
pub mod qgrad;
pub mod statevec;

pub use classical::{AdamState, PcaModel, Tensor};
pub use data::Dataset;
pub use encoding::{EncoderKind, EncoderSpec, FeatureScaler};
pub use error::{HqnnError, Result};
pub use models::{
    CnnModel, CnnQnnConfig, CnnQnnModel, HybridModel, MetricsRecord, ModelFile, PcaQnnModel, Readout, TrainConfig,
};
pub use pqc::{CircuitTemplate, EntanglementStrategy};
pub use statevec::{GateKind, GateOp, Statevector};

/// Library version recorded in experiment manifests and model files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
