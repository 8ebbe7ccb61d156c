//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of the basis index, so on three qubits
//! the basis state `|q0 q1 q2>` lives at index `q0·4 + q1·2 + q2`.
//!
//! Rotations follow `R_P(θ) = exp(-iθP/2)` for `P ∈ {X, Y, Z}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HqnnError, Result};
use crate::pqc::CircuitTemplate;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 24;

const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    /// `RY(θ₁)`, then `RZ(θ₂)`, then `RY(θ₃)` on one qubit.
    CompositeU,
    Cx,
    Cz,
}

impl GateKind {
    pub fn n_params(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::CompositeU => 3,
            GateKind::Cx | GateKind::Cz => 0,
        }
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::Cx | GateKind::Cz)
    }
}

/// One gate of a circuit program. Parameterized gates read their angles from
/// the circuit's parameter vector through `param_slots`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub param_slots: Vec<usize>,
}

impl GateOp {
    pub fn rx(target: usize, slot: usize) -> Self {
        Self::rotation(GateKind::Rx, target, slot)
    }

    pub fn ry(target: usize, slot: usize) -> Self {
        Self::rotation(GateKind::Ry, target, slot)
    }

    pub fn rz(target: usize, slot: usize) -> Self {
        Self::rotation(GateKind::Rz, target, slot)
    }

    pub fn rotation(kind: GateKind, target: usize, slot: usize) -> Self {
        GateOp { kind, target, control: None, param_slots: vec![slot] }
    }

    pub fn composite_u(target: usize, slots: [usize; 3]) -> Self {
        GateOp { kind: GateKind::CompositeU, target, control: None, param_slots: slots.to_vec() }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        GateOp { kind: GateKind::Cx, target, control: Some(control), param_slots: Vec::new() }
    }

    pub fn cz(control: usize, target: usize) -> Self {
        GateOp { kind: GateKind::Cz, target, control: Some(control), param_slots: Vec::new() }
    }

    /// Checks qubit indices against a register size and the slot arity against the kind.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(HqnnError::structural(format!(
                "{:?} target qubit {} out of range for {} qubits",
                self.kind, self.target, n_qubits
            )));
        }
        match (self.kind.is_two_qubit(), self.control) {
            (true, Some(c)) if c >= n_qubits => {
                return Err(HqnnError::structural(format!(
                    "{:?} control qubit {} out of range for {} qubits",
                    self.kind, c, n_qubits
                )))
            }
            (true, Some(c)) if c == self.target => {
                return Err(HqnnError::structural(format!("{:?} control and target are both qubit {}", self.kind, c)))
            }
            (true, None) => return Err(HqnnError::structural(format!("{:?} requires a control qubit", self.kind))),
            (false, Some(_)) => {
                return Err(HqnnError::structural(format!("{:?} does not take a control qubit", self.kind)))
            }
            _ => {}
        }
        if self.param_slots.len() != self.kind.n_params() {
            return Err(HqnnError::structural(format!(
                "{:?} expects {} parameter slots, got {}",
                self.kind,
                self.kind.n_params(),
                self.param_slots.len()
            )));
        }
        Ok(())
    }

    /// Looks up this gate's angles in a full parameter vector.
    pub fn angles(&self, params: &[f64]) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (dst, &slot) in out.iter_mut().zip(&self.param_slots) {
            *dst = *params.get(slot).ok_or_else(|| {
                HqnnError::structural(format!(
                    "parameter slot {} missing from a vector of length {}",
                    slot,
                    params.len()
                ))
            })?;
        }
        Ok(out)
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn rx_matrix(theta: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

pub(crate) fn ry_matrix(theta: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub(crate) fn rz_matrix(theta: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]]
}

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::default(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Operator of the composite gate: `RY(θ₃)·RZ(θ₂)·RY(θ₁)` (RY(θ₁) acts first).
pub(crate) fn composite_matrix(angles: [f64; 3]) -> Mat2 {
    matmul(&ry_matrix(angles[2]), &matmul(&rz_matrix(angles[1]), &ry_matrix(angles[0])))
}

fn single_qubit_matrix(kind: GateKind, angles: [f64; 3]) -> Mat2 {
    match kind {
        GateKind::Rx => rx_matrix(angles[0]),
        GateKind::Ry => ry_matrix(angles[0]),
        GateKind::Rz => rz_matrix(angles[0]),
        GateKind::CompositeU => composite_matrix(angles),
        GateKind::Cx | GateKind::Cz => unreachable!("two-qubit gate has no 2x2 matrix"),
    }
}

/// Quantum register state: `2^n_qubits` complex amplitudes with unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0>` on `n_qubits` qubits.
    pub fn init_zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amplitudes = vec![Complex64::default(); 1 << n_qubits];
        amplitudes[0] = c(1.0, 0.0);
        Ok(Statevector { n_qubits, amplitudes })
    }

    /// Wraps explicit amplitudes, checking length and normalization.
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(HqnnError::structural(format!(
                "{} amplitudes supplied for {} qubits (expected {})",
                amplitudes.len(),
                n_qubits,
                1usize << n_qubits
            )));
        }
        let sv = Statevector { n_qubits, amplitudes };
        let norm = sv.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(HqnnError::structural(format!("state norm is {norm}, expected 1")));
        }
        Ok(sv)
    }

    /// Real amplitudes, see [`Statevector::from_amplitudes`].
    pub fn from_real(n_qubits: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::from_amplitudes(n_qubits, amplitudes.iter().map(|&a| c(a, 0.0)).collect())
    }

    /// Skips the norm check; callers build intermediate (possibly unnormalized) vectors.
    pub(crate) fn from_raw(n_qubits: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Statevector { n_qubits, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Returns `U|ψ>` for one gate, reading angles from the full parameter vector.
    pub fn apply_gate(&self, gate: &GateOp, params: &[f64]) -> Result<Statevector> {
        gate.validate(self.n_qubits)?;
        let angles = gate.angles(params)?;
        let mut out = self.clone();
        out.apply_with_angles(gate, angles);
        Ok(out)
    }

    /// Runs every gate of `template` in order.
    pub fn apply_circuit(&self, template: &CircuitTemplate, params: &[f64]) -> Result<Statevector> {
        if template.n_qubits() != self.n_qubits {
            return Err(HqnnError::structural(format!(
                "circuit acts on {} qubits but the state has {}",
                template.n_qubits(),
                self.n_qubits
            )));
        }
        if params.len() != template.n_params() {
            return Err(HqnnError::structural(format!(
                "circuit has {} parameter slots but {} values were supplied",
                template.n_params(),
                params.len()
            )));
        }
        let mut out = self.clone();
        out.run_unchecked(template.gates(), params);
        Ok(out)
    }

    /// `<Z_q>`: probability of the qubit reading 0 minus probability of reading 1.
    pub fn z_expectation(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(HqnnError::structural(format!("qubit {} out of range for {} qubits", qubit, self.n_qubits)));
        }
        let mask = self.mask(qubit);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| if j & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// `<Z_q>` for every qubit in one pass over the amplitudes.
    pub fn z_expectations(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut out = vec![0.0; n];
        for (j, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, e) in out.iter_mut().enumerate() {
                if (j >> (n - 1 - q)) & 1 == 0 {
                    *e += p;
                } else {
                    *e -= p;
                }
            }
        }
        out
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies gates whose structure has already been validated against this register.
    pub(crate) fn run_unchecked(&mut self, gates: &[GateOp], params: &[f64]) {
        for gate in gates {
            let mut angles = [0.0; 3];
            for (dst, &slot) in angles.iter_mut().zip(&gate.param_slots) {
                *dst = params[slot];
            }
            self.apply_with_angles(gate, angles);
        }
    }

    /// In-place application with explicit angles (only the first `kind.n_params()` are read).
    pub(crate) fn apply_with_angles(&mut self, gate: &GateOp, angles: [f64; 3]) {
        match gate.kind {
            GateKind::Cx => self.apply_cx(gate.control.expect("validated"), gate.target),
            GateKind::Cz => self.apply_cz(gate.control.expect("validated"), gate.target),
            GateKind::Ry => self.apply_ry(gate.target, angles[0]),
            GateKind::Rz => self.apply_rz(gate.target, angles[0]),
            kind => self.apply_matrix(gate.target, &single_qubit_matrix(kind, angles)),
        }
    }

    /// In-place application of the inverse gate.
    pub(crate) fn apply_inverse_with_angles(&mut self, gate: &GateOp, angles: [f64; 3]) {
        match gate.kind {
            GateKind::CompositeU => {
                let m = composite_matrix(angles);
                let adjoint = [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]];
                self.apply_matrix(gate.target, &adjoint);
            }
            _ => self.apply_with_angles(gate, angles.map(|a| -a)),
        }
    }

    fn apply_matrix(&mut self, qubit: usize, m: &Mat2) {
        let mask = self.mask(qubit);
        let dim = self.amplitudes.len();
        for block in (0..dim).step_by(mask << 1) {
            for i in block..block + mask {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_ry(&mut self, qubit: usize, theta: f64) {
        let (s, co) = (theta / 2.0).sin_cos();
        let mask = self.mask(qubit);
        let dim = self.amplitudes.len();
        for block in (0..dim).step_by(mask << 1) {
            for i in block..block + mask {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = a0 * co - a1 * s;
                self.amplitudes[i | mask] = a0 * s + a1 * co;
            }
        }
    }

    fn apply_rz(&mut self, qubit: usize, theta: f64) {
        let (s, co) = (theta / 2.0).sin_cos();
        let phase0 = c(co, -s);
        let phase1 = c(co, s);
        let mask = self.mask(qubit);
        for (j, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if j & mask == 0 { phase0 } else { phase1 };
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let cm = self.mask(control);
        let tm = self.mask(target);
        for i in 0..self.amplitudes.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amplitudes.swap(i, i | tm);
            }
        }
    }

    fn apply_cz(&mut self, control: usize, target: usize) {
        let both = self.mask(control) | self.mask(target);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & both == both {
                *a = -*a;
            }
        }
    }
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if !(1..=MAX_QUBITS).contains(&n_qubits) {
        return Err(HqnnError::config(format!("qubit count {n_qubits} outside the supported range 1..={MAX_QUBITS}")));
    }
    Ok(())
}
