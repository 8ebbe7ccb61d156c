//! Gradients of quantum-circuit outputs.
//!
//! Gate parameters are differentiated with the two-term parameter-shift rule,
//! `∂<Z_k>/∂θ = (<Z_k>(θ+π/2) − <Z_k>(θ−π/2)) / 2`, applied per gate
//! occurrence so slots shared between gates accumulate correctly.
//!
//! Input amplitudes are differentiated by running the circuit forward,
//! weighting with `Z_k`, and running the adjoint circuit back: for a real
//! input `ψ`, `<Z_k> = ψᵀ M_k ψ` with `M_k = U† Z_k U`, so the gradient is
//! `2·Re(M_k ψ)`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::classical::Tensor;
use crate::error::{HqnnError, Result};
use crate::pqc::CircuitTemplate;
use crate::statevec::Statevector;

/// Derivatives of every qubit's `<Z>` with respect to parameters and input amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumJacobian {
    /// Shape `(n_qubits, n_params)`.
    pub d_expect_d_param: Tensor,
    /// Shape `(n_qubits, 2^n_qubits)`.
    pub d_expect_d_input: Tensor,
}

impl QuantumJacobian {
    pub fn compute(template: &CircuitTemplate, params: &[f64], input_state: &Statevector) -> Result<Self> {
        Ok(QuantumJacobian {
            d_expect_d_param: param_shift_jacobian(template, params, input_state)?,
            d_expect_d_input: input_gradient(template, params, input_state)?,
        })
    }
}

fn check_dims(template: &CircuitTemplate, params: &[f64], input_state: &Statevector) -> Result<()> {
    if template.n_qubits() != input_state.n_qubits() {
        return Err(HqnnError::structural(format!(
            "circuit acts on {} qubits but the state has {}",
            template.n_qubits(),
            input_state.n_qubits()
        )));
    }
    if params.len() != template.n_params() {
        return Err(HqnnError::structural(format!(
            "circuit has {} parameter slots but {} values were supplied",
            template.n_params(),
            params.len()
        )));
    }
    Ok(())
}

/// Parameter-shift Jacobian of per-qubit `<Z>`, shape `(n_qubits, n_params)`.
pub fn param_shift_jacobian(template: &CircuitTemplate, params: &[f64], input_state: &Statevector) -> Result<Tensor> {
    check_dims(template, params, input_state)?;
    let n = template.n_qubits();
    let n_params = template.n_params();
    let gates = template.gates();
    let mut jac = vec![0.0; n * n_params];
    let mut prefix = input_state.clone();
    for (g, gate) in gates.iter().enumerate() {
        let angles = gate.angles(params)?;
        for (pos, &slot) in gate.param_slots.iter().enumerate() {
            let mut diff = vec![0.0; n];
            for (sign, shift) in [(1.0, FRAC_PI_2), (-1.0, -FRAC_PI_2)] {
                let mut shifted = angles;
                shifted[pos] += shift;
                let mut state = prefix.clone();
                state.apply_with_angles(gate, shifted);
                state.run_unchecked(&gates[g + 1..], params);
                for (k, e) in state.z_expectations().into_iter().enumerate() {
                    diff[k] += sign * e;
                }
            }
            for k in 0..n {
                jac[k * n_params + slot] += 0.5 * diff[k];
            }
        }
        prefix.apply_with_angles(gate, angles);
    }
    if n_params == 0 {
        return Ok(Tensor::zeros(&[n, 0]));
    }
    Tensor::new(vec![n, n_params], jac)
}

/// Vector-Jacobian product `upstreamᵀ · J_θ`.
pub fn param_shift_vjp(
    template: &CircuitTemplate,
    params: &[f64],
    input_state: &Statevector,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    if upstream.len() != template.n_qubits() {
        return Err(HqnnError::structural("upstream gradient must have one entry per qubit"));
    }
    let jac = param_shift_jacobian(template, params, input_state)?;
    let n_params = template.n_params();
    let mut out = vec![0.0; n_params];
    for (k, &g) in upstream.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (o, &j) in out.iter_mut().zip(&jac.data()[k * n_params..(k + 1) * n_params]) {
            *o += g * j;
        }
    }
    Ok(out)
}

fn ensure_real(state: &Statevector) -> Result<()> {
    if state.amplitudes().iter().any(|a| a.im != 0.0) {
        return Err(HqnnError::UnsupportedInput("input-amplitude gradients need a real-valued input state".into()));
    }
    Ok(())
}

fn run_adjoint(state: &mut Statevector, template: &CircuitTemplate, params: &[f64]) -> Result<()> {
    for gate in template.gates().iter().rev() {
        let angles = gate.angles(params)?;
        state.apply_inverse_with_angles(gate, angles);
    }
    Ok(())
}

/// `2·Re(U† W U ψ)` where `W = Σ_k weights_k Z_k` is diagonal in the computational basis.
fn weighted_back_projection(
    template: &CircuitTemplate,
    params: &[f64],
    forward: &Statevector,
    weights: &[f64],
) -> Result<Vec<f64>> {
    let n = template.n_qubits();
    let chi: Vec<Complex64> = forward
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let w: f64 =
                weights.iter().enumerate().map(|(k, &wk)| if (j >> (n - 1 - k)) & 1 == 0 { wk } else { -wk }).sum();
            a * w
        })
        .collect();
    let mut back = Statevector::from_raw(n, chi);
    run_adjoint(&mut back, template, params)?;
    Ok(back.amplitudes().iter().map(|a| 2.0 * a.re).collect())
}

/// Gradient of each `<Z_k>` with respect to real input amplitudes, shape `(n_qubits, 2^n)`.
pub fn input_gradient(template: &CircuitTemplate, params: &[f64], input_state: &Statevector) -> Result<Tensor> {
    check_dims(template, params, input_state)?;
    ensure_real(input_state)?;
    let n = template.n_qubits();
    let forward = input_state.apply_circuit(template, params)?;
    let mut data = Vec::with_capacity(n * input_state.dim());
    for k in 0..n {
        let mut weights = vec![0.0; n];
        weights[k] = 1.0;
        data.extend(weighted_back_projection(template, params, &forward, &weights)?);
    }
    Tensor::new(vec![n, input_state.dim()], data)
}

/// `upstreamᵀ · input_gradient` with a single adjoint pass.
pub fn input_vjp(
    template: &CircuitTemplate,
    params: &[f64],
    input_state: &Statevector,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    check_dims(template, params, input_state)?;
    ensure_real(input_state)?;
    if upstream.len() != template.n_qubits() {
        return Err(HqnnError::structural("upstream gradient must have one entry per qubit"));
    }
    let forward = input_state.apply_circuit(template, params)?;
    weighted_back_projection(template, params, &forward, upstream)
}

/// Jacobian of `x ↦ x/‖x‖`: `(I − ψψᵀ)/‖x‖` with `ψ = x/‖x‖`.
pub fn normalize_jacobian(raw_features: &[f64]) -> Result<Tensor> {
    let (psi, norm) = unit_and_norm(raw_features)?;
    let d = psi.len();
    let data = (0..d * d)
        .map(|idx| {
            let (i, j) = (idx / d, idx % d);
            let eye = if i == j { 1.0 } else { 0.0 };
            (eye - psi[i] * psi[j]) / norm
        })
        .collect();
    Tensor::new(vec![d, d], data)
}

/// `Jᵀ·upstream` for the normalization map without forming the matrix (it is symmetric).
pub fn normalize_vjp(raw_features: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
    let (psi, norm) = unit_and_norm(raw_features)?;
    if upstream.len() != psi.len() {
        return Err(HqnnError::structural("upstream length differs from feature length"));
    }
    let dot: f64 = psi.iter().zip(upstream).map(|(p, g)| p * g).sum();
    Ok(psi.iter().zip(upstream).map(|(p, g)| (g - p * dot) / norm).collect())
}

fn unit_and_norm(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(HqnnError::Encoding(format!("cannot normalize a vector with norm {norm}")));
    }
    Ok((x.iter().map(|v| v / norm).collect(), norm))
}

/// Central differences `(f(x+h·e_j) − f(x−h·e_j)) / 2h`.
pub fn finite_difference<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let plus = f(&probe);
            probe[j] = x[j] - h;
            let minus = f(&probe);
            probe[j] = x[j];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::GateOp;

    fn single_ry() -> CircuitTemplate {
        CircuitTemplate::new(1, vec![GateOp::ry(0, 0)], 1).unwrap()
    }

    #[test]
    fn shift_rule_on_cosine() {
        let t = single_ry();
        let zero = Statevector::init_zero(1).unwrap();
        let at0 = param_shift_jacobian(&t, &[0.0], &zero).unwrap();
        assert!(at0.data()[0].abs() < 1e-15);
        let at_half_pi = param_shift_jacobian(&t, &[FRAC_PI_2], &zero).unwrap();
        assert!((at_half_pi.data()[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn shared_slot_contributions_add() {
        // RY(θ) twice on |0> gives cos(2θ); derivative −2 sin(2θ).
        let t = CircuitTemplate::new(1, vec![GateOp::ry(0, 0), GateOp::ry(0, 0)], 1).unwrap();
        let theta = 0.4;
        let j = param_shift_jacobian(&t, &[theta], &Statevector::init_zero(1).unwrap()).unwrap();
        assert!((j.data()[0] + 2.0 * (2.0 * theta).sin()).abs() < 1e-14);
    }

    #[test]
    fn input_gradient_empty_circuit() {
        let t = CircuitTemplate::empty(1).unwrap();
        let s = Statevector::init_zero(1).unwrap();
        assert_eq!(input_gradient(&t, &[], &s).unwrap().data(), &[2.0, 0.0]);
        let s = Statevector::from_real(1, &[0.6, 0.8]).unwrap();
        let g = input_gradient(&t, &[], &s).unwrap();
        assert!((g.data()[0] - 1.2).abs() < 1e-15 && (g.data()[1] + 1.6).abs() < 1e-15);
    }

    #[test]
    fn input_gradient_rejects_complex_state() {
        let t = CircuitTemplate::empty(1).unwrap();
        let s = Statevector::init_zero(1).unwrap().apply_gate(&GateOp::rx(0, 0), &[0.5]).unwrap();
        assert!(matches!(input_gradient(&t, &[], &s), Err(HqnnError::UnsupportedInput(_))));
    }

    #[test]
    fn normalize_jacobian_examples() {
        let j = normalize_jacobian(&[1.0, 0.0]).unwrap();
        assert_eq!(j.data(), &[0.0, 0.0, 0.0, 1.0]);
        let x0 = [0.3, -1.2, 2.0];
        let j0 = normalize_jacobian(&x0).unwrap();
        let j3 = normalize_jacobian(&x0.map(|v| 3.0 * v)).unwrap();
        for (a, b) in j0.data().iter().zip(j3.data()) {
            assert!((a / 3.0 - b).abs() < 1e-15);
        }
        let norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..3 {
            let r: f64 = (0..3).map(|k| j0.at2(i, k) * x0[k] / norm).sum();
            assert!(r.abs() < 1e-15);
        }
        assert!(normalize_jacobian(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn normalize_vjp_matches_matrix() {
        let x = [0.5, -0.25, 1.5, 2.0];
        let g = [1.0, 2.0, -0.5, 0.25];
        let j = normalize_jacobian(&x).unwrap();
        let v = normalize_vjp(&x, &g).unwrap();
        for (c, vc) in v.iter().enumerate() {
            let expect: f64 = (0..4).map(|r| g[r] * j.at2(r, c)).sum();
            assert!((expect - vc).abs() < 1e-15);
        }
    }

    #[test]
    fn finite_difference_examples() {
        let g = finite_difference(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-8);
        assert_eq!(finite_difference(|_| 4.2, &[1.0, 2.0], 1e-3), vec![0.0, 0.0]);
        let g = finite_difference(|x| x[0].cos(), &[FRAC_PI_2], 1e-5);
        assert!((g[0] + 1.0).abs() < 1e-8);
    }
}
