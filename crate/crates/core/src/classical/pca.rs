use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::classical::Tensor;
use crate::error::{HqnnError, Result};

/// Fitted principal-component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `(k, d)` with orthonormal rows, sorted by descending explained variance.
    pub components: Tensor,
    /// Eigenvalues of the sample covariance matching `components`.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample covariance (divisor `m − 1`) of the rows of `x`.
pub fn covariance(x: &Tensor) -> Result<(Vec<f64>, DMatrix<f64>)> {
    x.expect_rank("pca input", 2)?;
    let (m, d) = (x.shape()[0], x.shape()[1]);
    if m < 2 {
        return Err(HqnnError::config("covariance needs at least two rows"));
    }
    let mut mean = vec![0.0; d];
    for i in 0..m {
        for (mu, v) in mean.iter_mut().zip(x.row(i)) {
            *mu += v;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= m as f64);
    // Accumulate the upper triangle of Σ (x−μ)(x−μ)ᵀ, skipping zero entries
    // (most pixels are background).
    let mut cov = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for i in 0..m {
        for ((c, v), mu) in centered.iter_mut().zip(x.row(i)).zip(&mean) {
            *c = v - mu;
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            let row = &mut cov[a * d..(a + 1) * d];
            for b in a..d {
                row[b] += ca * centered[b];
            }
        }
    }
    let denom = (m - 1) as f64;
    let mut full = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            full[(a, b)] = v;
            full[(b, a)] = v;
        }
    }
    Ok((mean, full))
}

/// Top-`k` eigenvectors of the sample covariance, each signed so that its
/// largest-magnitude entry is positive.
pub fn pca_fit(x: &Tensor, k: usize) -> Result<PcaModel> {
    x.expect_rank("pca input", 2)?;
    let (m, d) = (x.shape()[0], x.shape()[1]);
    if k == 0 || k > d || k + 1 > m {
        return Err(HqnnError::config(format!("cannot extract {k} components from {m} samples of dimension {d}")));
    }
    let (mean, cov) = covariance(x)?;
    // The covariance is symmetric PSD, so its singular pairs are its eigenpairs.
    // nalgebra's SymmetricEigen returns NaN on some rank-deficient pixel covariances.
    let svd = SVD::new(cov, true, false);
    let (values, vectors) = match svd.u {
        Some(u) => (svd.singular_values, u),
        None => return Err(HqnnError::Training("covariance decomposition produced no vectors".into())),
    };
    if values.iter().chain(vectors.iter()).any(|v| !v.is_finite()) {
        return Err(HqnnError::Training("covariance decomposition is not finite".into()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut comps = Vec::with_capacity(k * d);
    let mut explained = Vec::with_capacity(k);
    for &col in order.iter().take(k) {
        let v = vectors.column(col);
        let pivot = (0..d).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        comps.extend(v.iter().map(|e| sign * e));
        explained.push(values[col]);
    }
    Ok(PcaModel { mean, components: Tensor::new(vec![k, d], comps)?, explained_variance: explained })
}

/// `components · (x − mean)`.
pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(HqnnError::structural(format!("PCA fitted on dimension {}, got {}", model.input_dim(), x.len())));
    }
    let centered: Vec<f64> = x.iter().zip(&model.mean).map(|(v, m)| v - m).collect();
    Ok((0..model.k()).map(|r| model.components.row(r).iter().zip(&centered).map(|(c, v)| c * v).sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    #[test]
    fn two_point_example() {
        let x = Tensor::new(vec![2, 2], vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let model = pca_fit(&x, 1).unwrap();
        for &c in model.components.data() {
            assert!((c - FRAC_1_SQRT_2).abs() < 1e-12);
        }
        let p = pca_transform(&model, &[1.0, 1.0]).unwrap();
        assert!((p[0] - SQRT_2).abs() < 1e-12);
        assert!(pca_transform(&model, &[0.0, 0.0]).unwrap()[0].abs() < 1e-15);
        assert!(pca_transform(&model, &[0.0]).is_err());
    }

    #[test]
    fn isotropic_data_is_orthonormal() {
        let x = Tensor::new(vec![4, 2], vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
        let model = pca_fit(&x, 2).unwrap();
        let c = &model.components;
        let dot = |a: usize, b: usize| -> f64 { c.row(a).iter().zip(c.row(b)).map(|(p, q)| p * q).sum() };
        assert!((dot(0, 0) - 1.0).abs() < 1e-12);
        assert!((dot(1, 1) - 1.0).abs() < 1e-12);
        assert!(dot(0, 1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_k() {
        let x = Tensor::zeros(&[3, 4]);
        assert!(matches!(pca_fit(&x, 3), Err(HqnnError::Config(_))));
        assert!(matches!(pca_fit(&x, 5), Err(HqnnError::Config(_))));
        assert!(pca_fit(&x, 0).is_err());
    }
}
