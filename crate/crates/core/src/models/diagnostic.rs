use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{HqnnError, Result};
use crate::models::HybridModel;

pub const MIN_INITS: usize = 20;

/// Gradient statistics for one group of parameters across initializations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupVariance {
    pub group: String,
    pub n_params: usize,
    /// Mean over parameters and initializations of `|∂L/∂p|`.
    pub mean_abs_grad: f64,
    /// Mean over parameters of the population variance across initializations.
    pub variance: f64,
}

/// Redraws the circuit angles `n_inits` times and measures the batch-mean loss
/// gradient on `batch` at each draw.
///
/// Circuit angles are reported per ansatz block (`layer_0`, `layer_1`, ...,
/// `final_rotation`); other groups are reported under their own names. Models
/// without a circuit yield one row per group.
pub fn grad_variance_diagnostic<M: HybridModel + Clone>(
    model: &M,
    n_inits: usize,
    batch: &Dataset,
    seed: u64,
) -> Result<Vec<GroupVariance>> {
    if n_inits < MIN_INITS {
        return Err(HqnnError::config(format!(
            "gradient-variance diagnostic needs at least {MIN_INITS} initializations, got {n_inits}"
        )));
    }
    if batch.is_empty() {
        return Err(HqnnError::config("gradient-variance batch is empty"));
    }
    let groups = model.param_groups();
    let mut samples: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_inits);
    for init in 0..n_inits {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(init as u64);
        let mut m = model.clone();
        m.reinit_theta(&mut rng);
        samples.push(batch_gradient(&m, batch)?);
    }

    let mut rows = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        if group.frozen {
            continue;
        }
        let per_param: Vec<Vec<f64>> = (0..group.len).map(|p| samples.iter().map(|s| s[g][p]).collect()).collect();
        match model.circuit() {
            Some((theta_group, template)) if theta_group == g => {
                let blocks = template.slot_blocks();
                let last = template.n_blocks().saturating_sub(1);
                for b in 0..template.n_blocks() {
                    let members: Vec<&Vec<f64>> =
                        per_param.iter().zip(blocks).filter(|(_, &blk)| blk == b).map(|(v, _)| v).collect();
                    let name = if b == last && b > 0 { "final_rotation".to_string() } else { format!("layer_{b}") };
                    rows.push(summarize(name, &members));
                }
            }
            _ => {
                let members: Vec<&Vec<f64>> = per_param.iter().collect();
                rows.push(summarize(group.name.to_string(), &members));
            }
        }
    }
    Ok(rows)
}

fn batch_gradient<M: HybridModel>(model: &M, batch: &Dataset) -> Result<Vec<Vec<f64>>> {
    let groups = model.param_groups();
    let mut sums: Vec<Vec<f64>> = groups.iter().map(|g| if g.frozen { Vec::new() } else { vec![0.0; g.len] }).collect();
    for i in 0..batch.len() {
        let sample = model.sample_gradient(batch.image(i), batch.label(i))?;
        for (sum, grad) in sums.iter_mut().zip(&sample.grads) {
            for (s, g) in sum.iter_mut().zip(grad) {
                *s += g;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    sums.iter_mut().flatten().for_each(|v| *v *= scale);
    Ok(sums)
}

fn summarize(group: String, per_param: &[&Vec<f64>]) -> GroupVariance {
    let n_params = per_param.len();
    if n_params == 0 {
        return GroupVariance { group, n_params, mean_abs_grad: 0.0, variance: 0.0 };
    }
    let mut abs_sum = 0.0;
    let mut var_sum = 0.0;
    for draws in per_param {
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        var_sum += draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        abs_sum += draws.iter().map(|x| x.abs()).sum::<f64>() / n;
    }
    GroupVariance { group, n_params, mean_abs_grad: abs_sum / n_params as f64, variance: var_sum / n_params as f64 }
}

/// Population variance and mean absolute value of equally sized gradient draws,
/// elementwise then averaged. Exposed for checking permutation invariance.
pub fn variance_summary(draws: &[Vec<f64>]) -> (f64, f64) {
    if draws.is_empty() {
        return (0.0, 0.0);
    }
    let per_param: Vec<Vec<f64>> = (0..draws[0].len()).map(|p| draws.iter().map(|d| d[p]).collect()).collect();
    let refs: Vec<&Vec<f64>> = per_param.iter().collect();
    let s = summarize(String::new(), &refs);
    (s.mean_abs_grad, s.variance)
}
