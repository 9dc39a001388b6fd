//! Strongly entangling layered circuits for entities and relations.
//!
//! One layer is a general rotation on every data qubit followed by a CNOT ring
//! `q -> (q + r) mod n`. The ring range cycles through `1..n` with the layer
//! index. Entity circuits add a Hadamard on every data qubit in front;
//! relation circuits do not.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Circuit, Condition, Gate, ParamSlot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnsatzShape {
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl AnsatzShape {
    pub const fn new(n_qubits: usize, n_layers: usize) -> Self {
        Self { n_qubits, n_layers }
    }

    pub const fn param_count(&self) -> usize {
        self.n_layers * self.n_qubits * 3
    }

    /// CNOT ring range of `layer`; `None` when there is nothing to entangle.
    pub fn ring_range(&self, layer: usize) -> Option<usize> {
        (self.n_qubits > 1).then(|| layer % (self.n_qubits - 1) + 1)
    }

    /// Number of gates in `n_layers` layers, without any Hadamard prefix.
    pub fn gate_count(&self) -> usize {
        let cnots = if self.n_qubits > 1 { self.n_qubits } else { 0 };
        self.n_layers * (self.n_qubits + cnots)
    }
}

/// Where a layer stack takes its rotation angles from.
#[derive(Clone, Copy, Debug)]
pub enum LayerAngles<'a> {
    Fixed(&'a [f64]),
    /// Slots `base..base + param_count` of the target circuit.
    Bound { base: usize },
}

fn stack(shape: AnsatzShape, angles: LayerAngles<'_>, condition: Option<&Condition>, width: usize) -> Result<Circuit> {
    if let LayerAngles::Fixed(a) = angles {
        if a.len() != shape.param_count() {
            return Err(Error::Dimension {
                expected: shape.param_count(),
                actual: a.len(),
            });
        }
    }
    let mut c = Circuit::new(width)?;
    let n = shape.n_qubits;
    for layer in 0..shape.n_layers {
        for q in 0..n {
            let k = (layer * n + q) * 3;
            let gate = match angles {
                LayerAngles::Fixed(a) => Gate::rot(q, a[k], a[k + 1], a[k + 2]),
                LayerAngles::Bound { base } => Gate::rot_bound(
                    q,
                    [
                        ParamSlot::new(base + k),
                        ParamSlot::new(base + k + 1),
                        ParamSlot::new(base + k + 2),
                    ],
                ),
            };
            c.push(gate.when(condition.cloned()))?;
        }
        if let Some(r) = shape.ring_range(layer) {
            for q in 0..n {
                c.push(Gate::cnot(q, (q + r) % n).when(condition.cloned()))?;
            }
        }
    }
    Ok(c)
}

fn width_for(shape: AnsatzShape, condition: Option<&Condition>) -> usize {
    condition
        .and_then(|c| c.qubits().max())
        .map_or(shape.n_qubits, |m| shape.n_qubits.max(m + 1))
}

/// Appends the layer stack (or its inverse) to `circuit`, every gate carrying
/// `condition`.
pub fn push_entangling_layers(
    circuit: &mut Circuit,
    shape: AnsatzShape,
    angles: LayerAngles<'_>,
    condition: Option<&Condition>,
    inverted: bool,
) -> Result<()> {
    let layers = stack(shape, angles, condition, circuit.n_qubits())?;
    if inverted {
        circuit.extend_from(&layers.inverse())
    } else {
        circuit.extend_from(&layers)
    }
}

/// `U(angles)` as a standalone circuit with literal angles.
pub fn entangling_layers(shape: AnsatzShape, angles: &[f64], condition: Option<&Condition>) -> Result<Circuit> {
    stack(shape, LayerAngles::Fixed(angles), condition, width_for(shape, condition))
}

/// `U(angles)·H^⊗n`, preparing an entity state from `|0...0>`. The Hadamards
/// are never conditioned.
pub fn entity_prep(shape: AnsatzShape, angles: &[f64], condition: Option<&Condition>) -> Result<Circuit> {
    let layers = entangling_layers(shape, angles, condition)?;
    let mut c = Circuit::new(layers.n_qubits())?;
    for q in 0..shape.n_qubits {
        c.push(Gate::h(q))?;
    }
    c.extend_from(&layers)?;
    Ok(c)
}

/// Relation unitary: the layer stack with no Hadamard prefix.
pub fn relation_circuit(shape: AnsatzShape, angles: &[f64]) -> Result<Circuit> {
    entangling_layers(shape, angles, None)
}

pub fn inverse(circuit: &Circuit) -> Circuit {
    circuit.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_circuit, zero_state, GateKind, C64};
    use std::f64::consts::PI;

    fn cnot_pairs(c: &Circuit) -> Vec<(usize, usize)> {
        c.gates()
            .iter()
            .filter_map(|g| match g.kind {
                GateKind::Cnot { control, target } => Some((control, target)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn single_layer_zero_angles_is_identity_on_zero() {
        let shape = AnsatzShape::new(4, 1);
        let c = entangling_layers(shape, &[0.0; 12], None).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(cnot_pairs(&c), vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
        let mut s = zero_state(4).unwrap();
        run_circuit(&mut s, &c, &[]).unwrap();
        assert_eq!(s, zero_state(4).unwrap());
    }

    #[test]
    fn two_layer_ring_ranges() {
        let shape = AnsatzShape::new(4, 2);
        assert_eq!(shape.param_count(), 24);
        let c = entangling_layers(shape, &[0.1; 24], None).unwrap();
        let pairs = cnot_pairs(&c);
        assert_eq!(&pairs[..4], &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(&pairs[4..], &[(0, 2), (1, 3), (2, 0), (3, 1)]);
        assert_eq!(AnsatzShape::new(4, 5).ring_range(3), Some(1));
    }

    #[test]
    fn single_qubit_has_no_entanglers() {
        let shape = AnsatzShape::new(1, 3);
        let c = entangling_layers(shape, &[0.2; 9], None).unwrap();
        assert_eq!(c.len(), 3);
        assert!(cnot_pairs(&c).is_empty());
    }

    #[test]
    fn angle_count_mismatch() {
        let shape = AnsatzShape::new(2, 1);
        assert!(matches!(
            entangling_layers(shape, &[0.0; 5], None),
            Err(Error::Dimension { expected: 6, actual: 5 })
        ));
    }

    #[test]
    fn entity_prep_without_layers_is_uniform() {
        let c = entity_prep(AnsatzShape::new(2, 0), &[], None).unwrap();
        let mut s = zero_state(2).unwrap();
        run_circuit(&mut s, &c, &[]).unwrap();
        for a in s.amplitudes() {
            assert!((a - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn entity_prep_single_qubit_hand_computed() {
        // RY(π/2)·H|0> = |1>.
        let c = entity_prep(AnsatzShape::new(1, 1), &[0.0, PI / 2.0, 0.0], None).unwrap();
        let mut s = zero_state(1).unwrap();
        run_circuit(&mut s, &c, &[]).unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn conditioned_layers_widen_and_keep_hadamards_plain() {
        let cond = Condition::address(4, 2, 3).unwrap();
        let c = entity_prep(AnsatzShape::new(4, 1), &[0.3; 12], Some(&cond)).unwrap();
        assert_eq!(c.n_qubits(), 6);
        assert!(c.gates()[..4].iter().all(|g| g.condition.is_none()));
        assert!(c.gates()[4..].iter().all(|g| g.condition.as_ref() == Some(&cond)));
    }

    #[test]
    fn inverse_rot_angles() {
        let c = entangling_layers(AnsatzShape::new(1, 1), &[0.1, 0.2, 0.3], None).unwrap();
        let inv = inverse(&c);
        assert_eq!(inv.gates()[0], Gate::rot(0, -0.3, -0.2, -0.1));
        assert_eq!(inverse(&inv), c);
    }
}
