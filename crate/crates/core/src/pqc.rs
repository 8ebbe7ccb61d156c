//! Parameterized circuit templates.
//!
//! Two ansätze are provided. The baseline stacks `RX·RY·RZ` rotation blocks
//! with a cyclic CX entangler; the proposed one uses the three-angle
//! composite gate on every qubit followed by CX between every pair of
//! qubits. Both end with one extra rotation block after the last entangler,
//! so an `L`-layer template on `n` qubits has `3·n·(L+1)` parameters.

use serde::{Deserialize, Serialize};

use crate::error::{HqnnError, Result};
use crate::statevec::{GateOp, Statevector};

/// An immutable gate program with `n_params` trainable slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitTemplate {
    n_qubits: usize,
    gates: Vec<GateOp>,
    n_params: usize,
    /// Rotation block each slot belongs to; used to group gradient statistics.
    slot_blocks: Vec<usize>,
}

impl CircuitTemplate {
    /// Validates gate indices and that every slot below `n_params` is referenced.
    pub fn new(n_qubits: usize, gates: Vec<GateOp>, n_params: usize) -> Result<Self> {
        Self::with_blocks(n_qubits, gates, n_params, vec![0; n_params])
    }

    pub fn with_blocks(n_qubits: usize, gates: Vec<GateOp>, n_params: usize, slot_blocks: Vec<usize>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(HqnnError::config("a circuit needs at least one qubit"));
        }
        if slot_blocks.len() != n_params {
            return Err(HqnnError::structural("one block label is required per parameter slot"));
        }
        let mut used = vec![false; n_params];
        for gate in &gates {
            gate.validate(n_qubits)?;
            for &slot in &gate.param_slots {
                if slot >= n_params {
                    return Err(HqnnError::structural(format!(
                        "gate references slot {slot} but the template has {n_params} slots"
                    )));
                }
                used[slot] = true;
            }
        }
        if let Some(slot) = used.iter().position(|u| !u) {
            return Err(HqnnError::structural(format!("parameter slot {slot} is never used")));
        }
        Ok(CircuitTemplate { n_qubits, gates, n_params, slot_blocks })
    }

    /// Template with no gates.
    pub fn empty(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, Vec::new(), 0)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn slot_blocks(&self) -> &[usize] {
        &self.slot_blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.slot_blocks.iter().max().map_or(0, |b| b + 1)
    }

    /// Number of two-qubit gates.
    pub fn entangler_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.is_two_qubit()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementStrategy {
    Linear,
    Cyclic,
    Star,
    Full,
}

/// Ordered `(control, target)` pairs for one entangling layer.
pub fn entangler_pairs(strategy: EntanglementStrategy, n_qubits: usize) -> Result<Vec<(usize, usize)>> {
    if n_qubits < 2 {
        return Err(HqnnError::config(format!("entanglement needs at least 2 qubits, got {n_qubits}")));
    }
    let linear = (0..n_qubits - 1).map(|i| (i, i + 1));
    Ok(match strategy {
        EntanglementStrategy::Linear => linear.collect(),
        EntanglementStrategy::Cyclic => linear.chain(std::iter::once((n_qubits - 1, 0))).collect(),
        EntanglementStrategy::Star => (1..n_qubits).map(|i| (0, i)).collect(),
        EntanglementStrategy::Full => (0..n_qubits).flat_map(|i| (i + 1..n_qubits).map(move |j| (i, j))).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationBlock {
    /// `RX`, `RY`, `RZ` on each qubit, three slots per qubit.
    Xyz,
    /// One composite `RY·RZ·RY` gate per qubit, three slots per qubit.
    CompositeU,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglerGate {
    Cx,
    Cz,
}

/// Recipe for a layered ansatz; serializable so trained models can rebuild their circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub rotation: RotationBlock,
    pub entanglement: EntanglementStrategy,
    pub entangler: EntanglerGate,
    pub n_layers: usize,
}

impl AnsatzSpec {
    pub fn baseline(n_layers: usize) -> Self {
        AnsatzSpec {
            rotation: RotationBlock::Xyz,
            entanglement: EntanglementStrategy::Cyclic,
            entangler: EntanglerGate::Cx,
            n_layers,
        }
    }

    pub fn proposed(n_layers: usize) -> Self {
        AnsatzSpec {
            rotation: RotationBlock::CompositeU,
            entanglement: EntanglementStrategy::Full,
            entangler: EntanglerGate::Cx,
            n_layers,
        }
    }

    pub fn n_params(&self, n_qubits: usize) -> usize {
        3 * n_qubits * (self.n_layers + 1)
    }

    /// Layers of (rotation block, entangler), then a closing rotation block.
    pub fn build(&self, n_qubits: usize) -> Result<CircuitTemplate> {
        if self.n_layers == 0 {
            return Err(HqnnError::config("an ansatz needs at least one layer"));
        }
        let pairs = entangler_pairs(self.entanglement, n_qubits)?;
        let mut gates = Vec::new();
        let mut slot_blocks = Vec::with_capacity(self.n_params(n_qubits));
        let mut next_slot = 0;
        for block in 0..=self.n_layers {
            for q in 0..n_qubits {
                let slots = [next_slot, next_slot + 1, next_slot + 2];
                next_slot += 3;
                slot_blocks.extend([block; 3]);
                match self.rotation {
                    RotationBlock::Xyz => {
                        gates.push(GateOp::rx(q, slots[0]));
                        gates.push(GateOp::ry(q, slots[1]));
                        gates.push(GateOp::rz(q, slots[2]));
                    }
                    RotationBlock::CompositeU => gates.push(GateOp::composite_u(q, slots)),
                }
            }
            if block < self.n_layers {
                gates.extend(pairs.iter().map(|&(c, t)| match self.entangler {
                    EntanglerGate::Cx => GateOp::cx(c, t),
                    EntanglerGate::Cz => GateOp::cz(c, t),
                }));
            }
        }
        CircuitTemplate::with_blocks(n_qubits, gates, next_slot, slot_blocks)
    }
}

/// Per-layer RX/RY/RZ rotations with cyclic CX entanglers.
pub fn build_baseline_pqc(n_qubits: usize, n_layers: usize) -> Result<CircuitTemplate> {
    AnsatzSpec::baseline(n_layers).build(n_qubits)
}

/// Per-layer composite-gate rotations with all-pairs CX entanglers.
pub fn build_proposed_pqc(n_qubits: usize, n_layers: usize) -> Result<CircuitTemplate> {
    AnsatzSpec::proposed(n_layers).build(n_qubits)
}

/// Per-qubit `<Z>` after running `template` on `input_state`.
pub fn qnn_output(template: &CircuitTemplate, params: &[f64], input_state: &Statevector) -> Result<Vec<f64>> {
    Ok(input_state.apply_circuit(template, params)?.z_expectations())
}
