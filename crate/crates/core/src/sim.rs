//! Dense statevector simulator.
//!
//! Qubit 0 is the most significant bit of a basis index, so on `n` qubits
//! qubit `q` owns bit `n - 1 - q`. Every gate may carry a [`Condition`] on
//! other qubits; a conditioned gate acts as the identity on basis states whose
//! condition bits do not match, which is how batched circuits place one
//! triple per address-register branch.
//!
//! Gradients of diagonal observables (basis-state probabilities and weighted
//! sums of them) are computed exactly with a single reverse sweep over the
//! gate list.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Owner;

pub type C64 = Complex<f64>;
type Mat2 = [[C64; 2]; 2];

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 24;

const NORM_TOLERANCE: f64 = 1e-10;

#[inline]
fn bit(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl Statevector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Size(n_qubits));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = C64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps an explicit amplitude vector. The length must be a power of two
    /// and the vector must be normalized.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension {
                expected: len.next_power_of_two().max(2),
                actual: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Size(n_qubits));
        }
        let state = Self {
            n_qubits,
            amplitudes,
        };
        if (state.norm_sqr() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Contract("amplitudes must be normalized"));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub fn zero_state(n_qubits: usize) -> Result<Statevector> {
    Statevector::zero(n_qubits)
}

/// Requirement that a set of qubits hold fixed bit values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    terms: Vec<(usize, bool)>,
}

impl Condition {
    pub fn new(terms: Vec<(usize, bool)>) -> Result<Self> {
        let mut seen: Vec<usize> = terms.iter().map(|&(q, _)| q).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Circuit("condition lists a qubit twice".into()));
        }
        Ok(Self { terms })
    }

    /// Address-register condition: qubits `first..first + width` must encode
    /// `value`, with `first` as the most significant bit. Returns `None` for an
    /// empty register.
    pub fn address(first: usize, width: usize, value: usize) -> Option<Self> {
        if width == 0 {
            return None;
        }
        let terms = (0..width)
            .map(|j| (first + j, (value >> (width - 1 - j)) & 1 == 1))
            .collect();
        Some(Self { terms })
    }

    pub fn terms(&self) -> &[(usize, bool)] {
        &self.terms
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|&(q, _)| q)
    }

    fn mask_value(&self, n_qubits: usize) -> (usize, usize) {
        self.terms.iter().fold((0, 0), |(mask, value), &(q, b)| {
            let qb = bit(n_qubits, q);
            (mask | qb, if b { value | qb } else { value })
        })
    }
}

/// Index into a circuit's flat parameter vector. A negated slot feeds `-p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamSlot {
    pub index: usize,
    pub negated: bool,
}

impl ParamSlot {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            negated: false,
        }
    }

    fn flipped(self) -> Self {
        Self {
            index: self.index,
            negated: !self.negated,
        }
    }

    fn resolve(self, params: &[f64]) -> f64 {
        let v = params[self.index];
        if self.negated {
            -v
        } else {
            v
        }
    }

    fn sign(self) -> f64 {
        if self.negated {
            -1.0
        } else {
            1.0
        }
    }
}

/// Angles (φ, θ, ω) of a rotation: either all literal or all bound to slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RotParams {
    Fixed([f64; 3]),
    Bound([ParamSlot; 3]),
}

impl RotParams {
    fn resolve(&self, params: &[f64]) -> [f64; 3] {
        match self {
            RotParams::Fixed(a) => *a,
            RotParams::Bound(s) => [s[0].resolve(params), s[1].resolve(params), s[2].resolve(params)],
        }
    }

    fn inverse(&self) -> Self {
        match self {
            RotParams::Fixed([phi, theta, omega]) => RotParams::Fixed([-omega, -theta, -phi]),
            RotParams::Bound([a, b, c]) => RotParams::Bound([c.flipped(), b.flipped(), a.flipped()]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    H(usize),
    /// `RZ(ω)·RY(θ)·RZ(φ)` on `target`.
    Rot { target: usize, params: RotParams },
    Cnot { control: usize, target: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub condition: Option<Condition>,
}

impl Gate {
    pub fn h(target: usize) -> Self {
        GateKind::H(target).into()
    }

    pub fn rot(target: usize, phi: f64, theta: f64, omega: f64) -> Self {
        GateKind::Rot {
            target,
            params: RotParams::Fixed([phi, theta, omega]),
        }
        .into()
    }

    pub fn rot_bound(target: usize, slots: [ParamSlot; 3]) -> Self {
        GateKind::Rot {
            target,
            params: RotParams::Bound(slots),
        }
        .into()
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateKind::Cnot { control, target }.into()
    }

    pub fn when(mut self, condition: Option<Condition>) -> Self {
        self.condition = condition;
        self
    }

    fn acted_qubits(&self) -> ([usize; 2], usize) {
        match self.kind {
            GateKind::H(t) | GateKind::Rot { target: t, .. } => ([t, t], 1),
            GateKind::Cnot { control, target } => ([control, target], 2),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let (qs, count) = self.acted_qubits();
        let qs = &qs[..count];
        if let Some(&q) = qs.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::Circuit(format!("qubit {q} out of range for {n_qubits} qubits")));
        }
        if count == 2 && qs[0] == qs[1] {
            return Err(Error::Circuit("CNOT control equals target".into()));
        }
        if let Some(cond) = &self.condition {
            for q in cond.qubits() {
                if q >= n_qubits {
                    return Err(Error::Circuit(format!(
                        "condition qubit {q} out of range for {n_qubits} qubits"
                    )));
                }
                if qs.contains(&q) {
                    return Err(Error::Circuit(format!(
                        "condition qubit {q} overlaps the gate's own qubits"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn inverse(&self) -> Self {
        let kind = match &self.kind {
            GateKind::Rot { target, params } => GateKind::Rot {
                target: *target,
                params: params.inverse(),
            },
            other => other.clone(),
        };
        Gate {
            kind,
            condition: self.condition.clone(),
        }
    }

    fn max_slot(&self) -> Option<usize> {
        match &self.kind {
            GateKind::Rot {
                params: RotParams::Bound(s),
                ..
            } => s.iter().map(|s| s.index).max(),
            _ => None,
        }
    }
}

impl From<GateKind> for Gate {
    fn from(kind: GateKind) -> Self {
        Gate {
            kind,
            condition: None,
        }
    }
}

/// Block of consecutive parameter slots owned by one entity or relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub owner: Owner,
    pub base: usize,
    pub len: usize,
}

/// Ordered gate list plus the parameter-slot layout its bound rotations use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    bindings: Vec<Binding>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Size(n_qubits));
        }
        Ok(Self {
            n_qubits,
            gates: Vec::new(),
            n_params: 0,
            bindings: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Number of entries a parameter vector for this circuit must have.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        if let Some(max) = gate.max_slot() {
            self.n_params = self.n_params.max(max + 1);
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Slot base for `owner`'s parameter block, allocating `len` fresh slots
    /// on first use. Repeated owners share one block.
    pub fn bind(&mut self, owner: Owner, len: usize) -> Result<usize> {
        if let Some(b) = self.bindings.iter().find(|b| b.owner == owner) {
            if b.len != len {
                return Err(Error::Parameter(format!(
                    "{owner} bound with {} slots, then {len}",
                    b.len
                )));
            }
            return Ok(b.base);
        }
        let base = self.n_params;
        self.n_params += len;
        self.bindings.push(Binding { owner, base, len });
        Ok(base)
    }

    pub fn inverse(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            n_params: self.n_params,
            bindings: self.bindings.clone(),
        }
    }

    /// Appends `other` gate-for-gate. Both circuits must index the same slots.
    pub fn extend_from(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        for g in &other.gates {
            self.push(g.clone())?;
        }
        Ok(())
    }

    pub fn has_conditions(&self) -> bool {
        self.gates.iter().any(|g| g.condition.is_some())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() < self.n_params {
            return Err(Error::Parameter(format!(
                "circuit reads {} parameter slots but {} were supplied",
                self.n_params,
                params.len()
            )));
        }
        Ok(())
    }
}

fn rot_matrix([phi, theta, omega]: [f64; 3]) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let sum = C64::from_polar(1.0, -(phi + omega) / 2.0);
    let diff = C64::from_polar(1.0, (phi - omega) / 2.0);
    [[sum * c, -diff * s], [diff.conj() * s, sum.conj() * c]]
}

/// ∂/∂φ, ∂/∂θ, ∂/∂ω of [`rot_matrix`].
fn rot_derivatives(angles: [f64; 3]) -> [Mat2; 3] {
    let [phi, theta, omega] = angles;
    let m = rot_matrix(angles);
    let half_i = C64::new(0.0, 0.5);
    let d_phi = [[-half_i * m[0][0], half_i * m[0][1]], [-half_i * m[1][0], half_i * m[1][1]]];
    let d_omega = [[-half_i * m[0][0], -half_i * m[0][1]], [half_i * m[1][0], half_i * m[1][1]]];
    let (s, c) = (theta / 2.0).sin_cos();
    let sum = C64::from_polar(1.0, -(phi + omega) / 2.0);
    let diff = C64::from_polar(1.0, (phi - omega) / 2.0);
    let d_theta = [
        [sum * (-s / 2.0), -diff * (c / 2.0)],
        [diff.conj() * (c / 2.0), sum.conj() * (-s / 2.0)],
    ];
    [d_phi, d_theta, d_omega]
}

fn hadamard() -> Mat2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn dagger(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

fn apply_mat(amps: &mut [C64], tb: usize, m: &Mat2, mask: usize, value: usize) {
    for i in 0..amps.len() {
        if i & tb != 0 || i & mask != value {
            continue;
        }
        let j = i | tb;
        let (a, b) = (amps[i], amps[j]);
        amps[i] = m[0][0] * a + m[0][1] * b;
        amps[j] = m[1][0] * a + m[1][1] * b;
    }
}

fn apply_cnot(amps: &mut [C64], cb: usize, tb: usize, mask: usize, value: usize) {
    for i in 0..amps.len() {
        if i & cb != 0 && i & tb == 0 && i & mask == value {
            amps.swap(i, i | tb);
        }
    }
}

/// `<lambda| D |phi>` with `D` acting on `target` inside the conditioned
/// subspace and as zero elsewhere.
fn sandwich(lambda: &[C64], phi: &[C64], tb: usize, d: &Mat2, mask: usize, value: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..phi.len() {
        if i & tb != 0 || i & mask != value {
            continue;
        }
        let j = i | tb;
        let (a, b) = (phi[i], phi[j]);
        acc += lambda[i].conj() * (d[0][0] * a + d[0][1] * b);
        acc += lambda[j].conj() * (d[1][0] * a + d[1][1] * b);
    }
    acc
}

/// Resolved form of one gate, ready for a kernel.
enum Op {
    Single { tb: usize, m: Mat2 },
    Cnot { cb: usize, tb: usize },
}

fn lower(gate: &Gate, n_qubits: usize, params: &[f64], tweak: Option<(usize, f64)>) -> (Op, usize, usize) {
    let (mask, value) = gate
        .condition
        .as_ref()
        .map_or((0, 0), |c| c.mask_value(n_qubits));
    let op = match &gate.kind {
        GateKind::H(t) => Op::Single {
            tb: bit(n_qubits, *t),
            m: hadamard(),
        },
        GateKind::Rot { target, params: rp } => {
            let mut angles = rp.resolve(params);
            if let Some((k, delta)) = tweak {
                angles[k] += delta;
            }
            Op::Single {
                tb: bit(n_qubits, *target),
                m: rot_matrix(angles),
            }
        }
        GateKind::Cnot { control, target } => Op::Cnot {
            cb: bit(n_qubits, *control),
            tb: bit(n_qubits, *target),
        },
    };
    (op, mask, value)
}

fn apply_op(amps: &mut [C64], op: &Op, mask: usize, value: usize, adjoint: bool) {
    match op {
        Op::Single { tb, m } => {
            if adjoint {
                apply_mat(amps, *tb, &dagger(m), mask, value)
            } else {
                apply_mat(amps, *tb, m, mask, value)
            }
        }
        Op::Cnot { cb, tb } => apply_cnot(amps, *cb, *tb, mask, value),
    }
}

/// Applies one gate in place. Bound rotations read their angles from `params`.
pub fn apply_gate(state: &mut Statevector, gate: &Gate, params: &[f64]) -> Result<()> {
    gate.validate(state.n_qubits)?;
    if let Some(max) = gate.max_slot() {
        if max >= params.len() {
            return Err(Error::Parameter(format!("unresolved parameter slot {max}")));
        }
    }
    let (op, mask, value) = lower(gate, state.n_qubits, params, None);
    apply_op(&mut state.amplitudes, &op, mask, value, false);
    Ok(())
}

pub fn run_circuit(state: &mut Statevector, circuit: &Circuit, params: &[f64]) -> Result<()> {
    if state.n_qubits != circuit.n_qubits {
        return Err(Error::Dimension {
            expected: circuit.n_qubits,
            actual: state.n_qubits,
        });
    }
    circuit.check_params(params)?;
    run_unchecked(state, circuit, params, None);
    Ok(())
}

/// `tweak = (gate index, angle index, delta)` shifts one rotation angle of
/// one gate occurrence.
fn run_unchecked(state: &mut Statevector, circuit: &Circuit, params: &[f64], tweak: Option<(usize, usize, f64)>) {
    let n = state.n_qubits;
    for (idx, gate) in circuit.gates.iter().enumerate() {
        let t = tweak.and_then(|(g, k, d)| (g == idx).then_some((k, d)));
        let (op, mask, value) = lower(gate, n, params, t);
        apply_op(&mut state.amplitudes, &op, mask, value, false);
    }
}

/// Per-qubit measurement constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitConstraint {
    Zero,
    One,
    Any,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern(pub Vec<QubitConstraint>);

impl Pattern {
    pub fn all_zero(n_qubits: usize) -> Self {
        Pattern(vec![QubitConstraint::Zero; n_qubits])
    }

    pub fn any(n_qubits: usize) -> Self {
        Pattern(vec![QubitConstraint::Any; n_qubits])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn mask_value(&self) -> (usize, usize) {
        let n = self.0.len();
        self.0.iter().enumerate().fold((0, 0), |(mask, value), (q, c)| match c {
            QubitConstraint::Zero => (mask | bit(n, q), value),
            QubitConstraint::One => (mask | bit(n, q), value | bit(n, q)),
            QubitConstraint::Any => (mask, value),
        })
    }
}

impl From<&str> for Pattern {
    /// `'0'`, `'1'`, anything else is a wildcard; leftmost character is qubit 0.
    fn from(s: &str) -> Self {
        Pattern(
            s.chars()
                .map(|c| match c {
                    '0' => QubitConstraint::Zero,
                    '1' => QubitConstraint::One,
                    _ => QubitConstraint::Any,
                })
                .collect(),
        )
    }
}

/// Total probability of the basis states consistent with `pattern`.
pub fn basis_probability(state: &Statevector, pattern: &Pattern) -> Result<f64> {
    if pattern.len() != state.n_qubits {
        return Err(Error::Dimension {
            expected: state.n_qubits,
            actual: pattern.len(),
        });
    }
    let (mask, value) = pattern.mask_value();
    Ok(state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask == value)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// `<a|b>`.
pub fn overlap(a: &Statevector, b: &Statevector) -> Result<C64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::Dimension {
            expected: a.n_qubits,
            actual: b.n_qubits,
        });
    }
    Ok(a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Observable diagonal in the computational basis, `O = Σ_k w_k |k><k|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalObservable {
    weights: Vec<f64>,
}

impl DiagonalObservable {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 || !weights.len().is_power_of_two() {
            return Err(Error::Dimension {
                expected: weights.len().next_power_of_two().max(2),
                actual: weights.len(),
            });
        }
        Ok(Self { weights })
    }

    /// Projector onto the basis states matching `pattern`.
    pub fn projector(pattern: &Pattern) -> Self {
        let (mask, value) = pattern.mask_value();
        let weights = (0..1usize << pattern.len())
            .map(|i| if i & mask == value { 1.0 } else { 0.0 })
            .collect();
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation(&self, state: &Statevector) -> Result<f64> {
        self.check(state)?;
        Ok(state
            .amplitudes
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.norm_sqr())
            .sum())
    }

    fn check(&self, state: &Statevector) -> Result<()> {
        if self.weights.len() != state.dim() {
            return Err(Error::Dimension {
                expected: state.dim(),
                actual: self.weights.len(),
            });
        }
        Ok(())
    }
}

/// Gradient of `<ψ|O|ψ>` with respect to every parameter slot, where
/// `final_state = circuit · |0...0>` was produced with the same `params`.
///
/// Walks the gates backwards, un-applying each one to both the state and the
/// adjoint vector `O|ψ>`. Slots feeding several gates accumulate every
/// occurrence.
pub fn adjoint_gradient(
    circuit: &Circuit,
    params: &[f64],
    final_state: &Statevector,
    observable: &DiagonalObservable,
) -> Result<Vec<f64>> {
    if final_state.n_qubits != circuit.n_qubits {
        return Err(Error::Dimension {
            expected: circuit.n_qubits,
            actual: final_state.n_qubits,
        });
    }
    observable.check(final_state)?;
    circuit.check_params(params)?;

    let n = circuit.n_qubits;
    let mut grad = vec![0.0; circuit.n_params];
    let mut phi = final_state.amplitudes.clone();
    let mut lambda: Vec<C64> = phi
        .iter()
        .zip(&observable.weights)
        .map(|(a, w)| a * *w)
        .collect();

    for gate in circuit.gates.iter().rev() {
        let (op, mask, value) = lower(gate, n, params, None);
        apply_op(&mut phi, &op, mask, value, true);
        if let GateKind::Rot {
            target,
            params: RotParams::Bound(slots),
        } = &gate.kind
        {
            let angles = gate_angles(gate, params);
            let tb = bit(n, *target);
            for (slot, d) in slots.iter().zip(rot_derivatives(angles).iter()) {
                let g = 2.0 * sandwich(&lambda, &phi, tb, d, mask, value).re;
                grad[slot.index] += slot.sign() * g;
            }
        }
        apply_op(&mut lambda, &op, mask, value, true);
    }
    Ok(grad)
}

fn gate_angles(gate: &Gate, params: &[f64]) -> [f64; 3] {
    match &gate.kind {
        GateKind::Rot { params: rp, .. } => rp.resolve(params),
        _ => [0.0; 3],
    }
}

/// `∂ P(pattern) / ∂ params` for `circuit` applied to `|0...0>`.
pub fn gradient_exact(circuit: &Circuit, params: &[f64], pattern: &Pattern) -> Result<Vec<f64>> {
    if pattern.len() != circuit.n_qubits {
        return Err(Error::Dimension {
            expected: circuit.n_qubits,
            actual: pattern.len(),
        });
    }
    let mut state = Statevector::zero(circuit.n_qubits)?;
    run_circuit(&mut state, circuit, params)?;
    adjoint_gradient(circuit, params, &state, &DiagonalObservable::projector(pattern))
}

/// Two-term parameter-shift gradient of `<O>` for `circuit` on `|0...0>`.
///
/// Each rotation angle has a ±1/2-eigenvalue generator, so the rule is exact
/// per occurrence; shared slots sum their occurrences. Conditioned gates break
/// the two-term form and are rejected.
pub fn parameter_shift_gradient(
    circuit: &Circuit,
    params: &[f64],
    observable: &DiagonalObservable,
) -> Result<Vec<f64>> {
    if circuit.has_conditions() {
        return Err(Error::Circuit(
            "parameter-shift rule needs an unconditioned circuit".into(),
        ));
    }
    circuit.check_params(params)?;
    let zero = Statevector::zero(circuit.n_qubits)?;
    observable.check(&zero)?;
    let eval = |tweak| {
        let mut s = zero.clone();
        run_unchecked(&mut s, circuit, params, Some(tweak));
        observable.expectation(&s)
    };
    let mut grad = vec![0.0; circuit.n_params];
    for (idx, gate) in circuit.gates.iter().enumerate() {
        if let GateKind::Rot {
            params: RotParams::Bound(slots),
            ..
        } = &gate.kind
        {
            for (k, slot) in slots.iter().enumerate() {
                let plus = eval((idx, k, FRAC_PI_2))?;
                let minus = eval((idx, k, -FRAC_PI_2))?;
                grad[slot.index] += slot.sign() * (plus - minus) / 2.0;
            }
        }
    }
    Ok(grad)
}
