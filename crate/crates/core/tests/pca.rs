use hqnn_core::classical::{pca_fit, pca_transform, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigenvalue iteration on a dense symmetric matrix.
/// Returns eigenvalues and eigenvectors (as columns of a row-major d×d matrix).
fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

fn sample_covariance(x: &[f64], m: usize, d: usize) -> Vec<f64> {
    let mean: Vec<f64> = (0..d).map(|j| (0..m).map(|i| x[i * d + j]).sum::<f64>() / m as f64).collect();
    let mut c = vec![0.0; d * d];
    for i in 0..m {
        for a in 0..d {
            for b in 0..d {
                c[a * d + b] += (x[i * d + a] - mean[a]) * (x[i * d + b] - mean[b]);
            }
        }
    }
    c.iter().map(|v| v / (m - 1) as f64).collect()
}

#[test]
fn components_match_jacobi_oracle_up_to_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (m, d, k) = (50, 20, 5);
    for trial in 0..5 {
        // anisotropic columns give a well-separated spectrum
        let x: Vec<f64> = (0..m * d).map(|i| rng.random_range(-1.0..1.0) * (1.0 + (i % d) as f64 * 0.3)).collect();
        let model = pca_fit(&Tensor::new(vec![m, d], x.clone()).unwrap(), k).unwrap();

        let (vals, vecs) = jacobi_eigen(sample_covariance(&x, m, d), d);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

        for c in 0..k {
            let oracle: Vec<f64> = (0..d).map(|r| vecs[r * d + order[c]]).collect();
            let ours = model.components.row(c);
            let dot: f64 = oracle.iter().zip(ours).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8, "trial {trial} component {c}: |dot| = {}", dot.abs());
            assert!((model.explained_variance[c] - vals[order[c]]).abs() < 1e-8 * vals[order[0]]);
            // sign convention: largest-magnitude entry is positive
            let big = ours.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            assert!(big > 0.0);
        }
        for a in 0..k {
            for b in 0..k {
                let dot: f64 = model.components.row(a).iter().zip(model.components.row(b)).map(|(x, y)| x * y).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn two_point_worked_example() {
    let x = Tensor::new(vec![2, 2], vec![1.0, 1.0, -1.0, -1.0]).unwrap();
    let model = pca_fit(&x, 1).unwrap();
    let s = 1.0 / 2f64.sqrt();
    assert!((model.components.row(0)[0] - s).abs() < 1e-12);
    assert!((model.components.row(0)[1] - s).abs() < 1e-12);
    let z = pca_transform(&model, &[1.0, 1.0]).unwrap();
    assert!((z[0] - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn isotropic_data_gives_orthonormal_components() {
    let x = Tensor::new(vec![4, 2], vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
    let model = pca_fit(&x, 2).unwrap();
    let (a, b) = (model.components.row(0), model.components.row(1));
    assert!((a[0] * a[0] + a[1] * a[1] - 1.0).abs() < 1e-12);
    assert!((b[0] * b[0] + b[1] * b[1] - 1.0).abs() < 1e-12);
    assert!((a[0] * b[0] + a[1] * b[1]).abs() < 1e-12);
}

#[test]
fn too_many_components_or_samples_is_an_error() {
    let x = Tensor::new(vec![3, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert!(pca_fit(&x, 3).is_err());
    let single = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
    assert!(pca_fit(&single, 1).is_err());
}
