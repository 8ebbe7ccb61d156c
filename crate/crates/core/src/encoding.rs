//! Classical-to-quantum data loading.
//!
//! Angle encoding writes feature `j` as a single-qubit rotation on qubit `j`,
//! so features must first be squeezed into an angle range ([`FeatureScaler`]).
//! Amplitude encoding zero-pads a vector to `2^n` entries, normalizes it, and
//! writes it directly as real amplitudes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HqnnError, Result};
use crate::statevec::{GateKind, GateOp, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Angle,
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub n_qubits: usize,
    /// Rotation used by angle encoding; one of `Rx`, `Ry`, `Rz`.
    pub angle_axis: GateKind,
    /// Target interval for [`FeatureScaler`].
    pub scale_range: (f64, f64),
}

impl EncoderSpec {
    /// Angle encoding with `RY` rotations and features scaled to `[0, π]`.
    pub fn angle(n_qubits: usize) -> Self {
        EncoderSpec { kind: EncoderKind::Angle, n_qubits, angle_axis: GateKind::Ry, scale_range: (0.0, PI) }
    }

    pub fn amplitude(n_qubits: usize) -> Self {
        EncoderSpec { kind: EncoderKind::Amplitude, n_qubits, angle_axis: GateKind::Ry, scale_range: (0.0, PI) }
    }

    pub fn encode(&self, features: &[f64]) -> Result<Statevector> {
        match self.kind {
            EncoderKind::Angle => angle_encode(features, self),
            EncoderKind::Amplitude => amplitude_encode(features, self),
        }
    }
}

/// `⊗_j R(features_j)|0>`.
pub fn angle_encode(features: &[f64], spec: &EncoderSpec) -> Result<Statevector> {
    if spec.kind != EncoderKind::Angle {
        return Err(HqnnError::Encoding("angle_encode called with a non-angle encoder".into()));
    }
    if features.len() != spec.n_qubits {
        return Err(HqnnError::Encoding(format!(
            "angle encoding needs one feature per qubit: {} features for {} qubits",
            features.len(),
            spec.n_qubits
        )));
    }
    if !matches!(spec.angle_axis, GateKind::Rx | GateKind::Ry | GateKind::Rz) {
        return Err(HqnnError::Encoding(format!("{:?} is not a single-axis rotation", spec.angle_axis)));
    }
    let mut state = Statevector::init_zero(spec.n_qubits)?;
    for (q, &angle) in features.iter().enumerate() {
        state.apply_with_angles(&GateOp::rotation(spec.angle_axis, q, 0), [angle, 0.0, 0.0]);
    }
    Ok(state)
}

/// Affine map of `value` from `[observed_min, observed_max]` onto `range`, clamped.
/// A degenerate observed range maps to the middle of `range`.
pub fn scale_value(value: f64, observed_min: f64, observed_max: f64, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    if observed_max <= observed_min {
        return 0.5 * (lo + hi);
    }
    let t = (value - observed_min) / (observed_max - observed_min);
    (lo + t * (hi - lo)).clamp(lo.min(hi), lo.max(hi))
}

/// Scales every value with one shared observed range onto `[0, π]`.
pub fn scale_features(features: &[f64], observed_min: f64, observed_max: f64) -> Result<Vec<f64>> {
    if observed_max < observed_min {
        return Err(HqnnError::config(format!("observed range is inverted: min {observed_min} > max {observed_max}")));
    }
    Ok(features.iter().map(|&v| scale_value(v, observed_min, observed_max, (0.0, PI))).collect())
}

/// Per-feature min/max statistics, fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub range: (f64, f64),
}

impl FeatureScaler {
    pub fn fit<'a, I>(rows: I, range: (f64, f64)) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut rows = rows.into_iter();
        let first = rows.next().ok_or_else(|| HqnnError::config("cannot fit a feature scaler on zero rows"))?;
        let mut mins = first.to_vec();
        let mut maxs = first.to_vec();
        for row in rows {
            if row.len() != mins.len() {
                return Err(HqnnError::structural(format!("feature rows of length {} and {}", mins.len(), row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(FeatureScaler { mins, maxs, range })
    }

    pub fn transform(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.mins.len() {
            return Err(HqnnError::structural(format!(
                "scaler fitted on {} features, got {}",
                self.mins.len(),
                features.len()
            )));
        }
        Ok(features.iter().enumerate().map(|(j, &v)| scale_value(v, self.mins[j], self.maxs[j], self.range)).collect())
    }
}

/// Zero-pads `features` to `2^n` and divides by the L2 norm. Returns the
/// normalized vector and the original norm.
pub fn normalize_padded(features: &[f64], n_qubits: usize) -> Result<(Vec<f64>, f64)> {
    let dim = 1usize << n_qubits;
    if features.len() > dim {
        return Err(HqnnError::Encoding(format!("{} features do not fit in {} amplitudes", features.len(), dim)));
    }
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(HqnnError::Encoding(format!("cannot amplitude-encode a vector with norm {norm}")));
    }
    let mut out = vec![0.0; dim];
    for (dst, &x) in out.iter_mut().zip(features) {
        *dst = x / norm;
    }
    Ok((out, norm))
}

/// `Σ_j x_j|j>` after zero-padding and L2 normalization.
pub fn amplitude_encode(features: &[f64], spec: &EncoderSpec) -> Result<Statevector> {
    if spec.kind != EncoderKind::Amplitude {
        return Err(HqnnError::Encoding("amplitude_encode called with a non-amplitude encoder".into()));
    }
    let (amps, _) = normalize_padded(features, spec.n_qubits)?;
    Ok(Statevector::from_raw(spec.n_qubits, amps.into_iter().map(|a| Complex64::new(a, 0.0)).collect()))
}
