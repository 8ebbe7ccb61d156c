//! Criterion benchmarks for the simulator, gradient and layer kernels; see `benches/`.

use hqnn_core::classical::Tensor;

/// Deterministic pseudo-image with values in `[0, 1)`.
pub fn sample_image(channels: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(&[channels, h, w], |i| ((i * 7919) % 997) as f64 / 997.0)
}

/// Deterministic angles in `[0, 2π)`.
pub fn sample_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 389) % 628) as f64 / 100.0).collect()
}
