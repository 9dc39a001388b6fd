//! Triple scores `δ = |<t| U_r |h>|²`, one triple at a time or a whole batch
//! per circuit execution.
//!
//! The batched circuit puts an address register of `q = log2 B` qubits after
//! the data register and prepares it in uniform superposition. Branch `i`
//! runs head, relation and un-prepared tail of triple `i`, each gate
//! conditioned on the address reading `i`. The probability of finding the
//! data register in `|0...0>` together with address `i` is then `δ_i / B`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{push_entangling_layers, AnsatzShape, LayerAngles};
use crate::data::{LabeledTriple, Triple};
use crate::error::{Error, Result};
use crate::params::{Owner, ParameterStore};
use crate::sim::{overlap, run_circuit, Circuit, Condition, Gate, Pattern, QubitConstraint, Statevector};

/// Shape of one superposed batch. The address register sits after the data
/// register, most significant address bit first.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLayout {
    n_data: usize,
    n_address: usize,
    triples: Vec<LabeledTriple>,
}

impl BatchLayout {
    pub fn new(n_data: usize, triples: Vec<LabeledTriple>) -> Result<Self> {
        let b = triples.len();
        if b == 0 {
            return Err(Error::Contract("batch must contain at least one triple"));
        }
        if !b.is_power_of_two() {
            return Err(Error::Config(format!("batch size {b} is not a power of two")));
        }
        Ok(Self {
            n_data,
            n_address: b.trailing_zeros() as usize,
            triples,
        })
    }

    pub fn from_triples(n_data: usize, triples: &[Triple]) -> Result<Self> {
        Self::new(n_data, triples.iter().copied().map(LabeledTriple::positive).collect())
    }

    pub fn batch_size(&self) -> usize {
        self.triples.len()
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn n_address(&self) -> usize {
        self.n_address
    }

    pub fn n_qubits(&self) -> usize {
        self.n_data + self.n_address
    }

    pub fn triples(&self) -> &[LabeledTriple] {
        &self.triples
    }

    pub fn branch_condition(&self, branch: usize) -> Option<Condition> {
        Condition::address(self.n_data, self.n_address, branch)
    }

    /// Data register all zero, address register reading `branch`.
    pub fn branch_pattern(&self, branch: usize) -> Pattern {
        let mut p = vec![QubitConstraint::Zero; self.n_data];
        p.extend((0..self.n_address).map(|j| {
            if (branch >> (self.n_address - 1 - j)) & 1 == 1 {
                QubitConstraint::One
            } else {
                QubitConstraint::Zero
            }
        }));
        Pattern(p)
    }
}

fn push_triple_body(
    circuit: &mut Circuit,
    triple: Triple,
    store: &ParameterStore,
    condition: Option<&Condition>,
) -> Result<()> {
    let e_shape = store.entity_shape();
    let r_shape = store.relation_shape();
    let mut bound = |owner: Owner, shape: AnsatzShape, inverted: bool| -> Result<()> {
        store.get(owner)?;
        let base = circuit.bind(owner, shape.param_count())?;
        push_entangling_layers(circuit, shape, LayerAngles::Bound { base }, condition, inverted)
    };
    bound(Owner::Entity(triple.head), e_shape, false)?;
    bound(Owner::Relation(triple.relation), r_shape, false)?;
    bound(Owner::Entity(triple.tail), e_shape, true)
}

/// `H^⊗n · U_t† · U_r · U_h · H^⊗n` on the data register, with every
/// parameter bound to the owning entity or relation.
pub fn triple_circuit(triple: Triple, store: &ParameterStore) -> Result<Circuit> {
    build_batched(&BatchLayout::from_triples(store.n_qubits(), &[triple])?, store)
}

pub fn build_batched(layout: &BatchLayout, store: &ParameterStore) -> Result<Circuit> {
    if layout.n_data != store.n_qubits() {
        return Err(Error::Dimension {
            expected: store.n_qubits(),
            actual: layout.n_data,
        });
    }
    let n = layout.n_data;
    let mut c = Circuit::new(layout.n_qubits())?;
    for a in 0..layout.n_address {
        c.push(Gate::h(n + a))?;
    }
    for q in 0..n {
        c.push(Gate::h(q))?;
    }
    for (i, lt) in layout.triples.iter().enumerate() {
        push_triple_body(&mut c, lt.triple, store, layout.branch_condition(i).as_ref())?;
    }
    for q in 0..n {
        c.push(Gate::h(q))?;
    }
    Ok(c)
}

/// `δ_i = B · P(data = 0, address = i)` for every branch.
pub fn extract_scores(state: &Statevector, layout: &BatchLayout) -> Result<Vec<f64>> {
    if state.n_qubits() != layout.n_qubits() {
        return Err(Error::Dimension {
            expected: layout.n_qubits(),
            actual: state.n_qubits(),
        });
    }
    let b = layout.batch_size() as f64;
    // Data-zero states occupy the first B basis indices.
    Ok(state.amplitudes()[..layout.batch_size()]
        .iter()
        .map(|a| b * a.norm_sqr())
        .collect())
}

/// Runs a built batch circuit from `|0...0>`.
pub fn run_batch(circuit: &Circuit, store: &ParameterStore) -> Result<(Statevector, Vec<f64>)> {
    let params = store.gather(circuit)?;
    let mut state = Statevector::zero(circuit.n_qubits())?;
    run_circuit(&mut state, circuit, &params)?;
    Ok((state, params))
}

/// Every δ of the batch from a single circuit execution.
pub fn score_batched(layout: &BatchLayout, store: &ParameterStore) -> Result<Vec<f64>> {
    let circuit = build_batched(layout, store)?;
    let (state, _) = run_batch(&circuit, store)?;
    extract_scores(&state, layout)
}

pub fn score_single(triple: Triple, store: &ParameterStore) -> Result<f64> {
    let circuit = triple_circuit(triple, store)?;
    let (state, _) = run_batch(&circuit, store)?;
    Ok(state.amplitudes()[0].norm_sqr())
}

/// Shot-based estimate of the batch scores: `shots` draws from the final
/// joint distribution, `δ_i ≈ B · count_i / shots`.
pub fn sample_scores<R: Rng + ?Sized>(
    state: &Statevector,
    layout: &BatchLayout,
    shots: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::Contract("shot count must be positive"));
    }
    if state.n_qubits() != layout.n_qubits() {
        return Err(Error::Dimension {
            expected: layout.n_qubits(),
            actual: state.n_qubits(),
        });
    }
    let mut cumulative = Vec::with_capacity(state.dim());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cumulative.push(acc);
    }
    let b = layout.batch_size();
    let mut counts = vec![0usize; b];
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c <= u).min(state.dim() - 1);
        if idx < b {
            counts[idx] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|c| b as f64 * c as f64 / shots as f64)
        .collect())
}

/// Prepared entity states, reused across many `(h, r, ?)` queries.
#[derive(Clone, Debug)]
pub struct EntityStates {
    states: Vec<Statevector>,
}

impl EntityStates {
    pub fn new(store: &ParameterStore) -> Result<Self> {
        let shape = store.entity_shape();
        let states = (0..store.n_entities())
            .map(|e| {
                let c = crate::ansatz::entity_prep(shape, store.get(Owner::Entity(e))?, None)?;
                let mut s = Statevector::zero(shape.n_qubits)?;
                run_circuit(&mut s, &c, &[])?;
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(Self { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, entity: usize) -> Result<&Statevector> {
        self.states.get(entity).ok_or_else(|| Error::Lookup {
            kind: "entity id",
            name: entity.to_string(),
        })
    }

    /// `U_r |h>`.
    pub fn transformed(&self, store: &ParameterStore, head: usize, relation: usize) -> Result<Statevector> {
        let angles = store.get(Owner::Relation(relation))?;
        let c = crate::ansatz::relation_circuit(store.relation_shape(), angles)?;
        let mut s = self.state(head)?.clone();
        run_circuit(&mut s, &c, &[])?;
        Ok(s)
    }

    /// δ(h, r, e) for every entity `e`.
    pub fn tail_scores(&self, store: &ParameterStore, head: usize, relation: usize) -> Result<Vec<f64>> {
        let query = self.transformed(store, head, relation)?;
        self.states
            .iter()
            .map(|e| Ok(overlap(e, &query)?.norm_sqr()))
            .collect()
    }

    /// δ(e, r, t) for every entity `e`.
    pub fn head_scores(&self, store: &ParameterStore, relation: usize, tail: usize) -> Result<Vec<f64>> {
        let target = self.state(tail)?;
        (0..self.states.len())
            .map(|h| Ok(overlap(target, &self.transformed(store, h, relation)?)?.norm_sqr()))
            .collect()
    }
}

/// Cost of scoring one batch, superposed versus one triple per execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub batch_size: usize,
    pub n_data_qubits: usize,
    pub n_address_qubits: usize,
    pub qubits_total: usize,
    /// Logical gates in the batched circuit; conditioned gates count once.
    pub gate_count: usize,
    pub sequential_gate_count: usize,
    pub executions_batched: usize,
    pub executions_sequential: usize,
    pub parameters_touched: usize,
    /// Entity state dimension, `2^n`.
    pub feature_dim: usize,
    pub elements: Option<usize>,
    pub epochs: Option<usize>,
    pub total_executions_batched: Option<usize>,
    pub total_executions_sequential: Option<usize>,
}

impl ResourceEstimate {
    /// Adds whole-run totals for `elements` triples over `epochs` passes.
    pub fn with_workload(mut self, elements: usize, epochs: usize) -> Self {
        self.elements = Some(elements);
        self.epochs = Some(epochs);
        self.total_executions_batched = Some(elements.div_ceil(self.batch_size) * epochs);
        self.total_executions_sequential = Some(elements * epochs);
        self
    }
}

pub fn resource_estimate(
    batch_size: usize,
    n_data: usize,
    entity_layers: usize,
    relation_layers: usize,
) -> Result<ResourceEstimate> {
    if batch_size == 0 || !batch_size.is_power_of_two() {
        return Err(Error::Config(format!(
            "batch size {batch_size} is not a power of two"
        )));
    }
    if n_data == 0 || n_data > crate::sim::MAX_QUBITS {
        return Err(Error::Size(n_data));
    }
    let n_address = batch_size.trailing_zeros() as usize;
    let e = AnsatzShape::new(n_data, entity_layers);
    let r = AnsatzShape::new(n_data, relation_layers);
    let body = 2 * e.gate_count() + r.gate_count();
    Ok(ResourceEstimate {
        batch_size,
        n_data_qubits: n_data,
        n_address_qubits: n_address,
        qubits_total: n_data + n_address,
        gate_count: n_address + 2 * n_data + batch_size * body,
        sequential_gate_count: batch_size * (2 * n_data + body),
        executions_batched: 1,
        executions_sequential: batch_size,
        parameters_touched: batch_size * (2 * e.param_count() + r.param_count()),
        feature_dim: 1 << n_data,
        elements: None,
        epochs: None,
        total_executions_batched: None,
        total_executions_sequential: None,
    })
}
