//! WebAssembly bindings for the browser demo.
//!
//! Every export takes plain numbers or JSON text and returns JSON text, so
//! the page needs no generated type definitions. The logic lives in
//! ordinary functions that are tested natively.

use qkge::ansatz::entity_prep;
use qkge::params::init_params;
use qkge::scoring::{build_batched, extract_scores, resource_estimate, run_batch, score_single, BatchLayout};
use qkge::sim::{run_circuit, Statevector};
use qkge::{AnsatzShape, Result, Triple};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest register the page lets a user build.
pub const MAX_DEMO_QUBITS: usize = 6;

#[derive(Debug, Serialize)]
pub struct EntityView {
    pub n_qubits: usize,
    pub basis: Vec<String>,
    pub probabilities: Vec<f64>,
    pub phases: Vec<f64>,
    pub gate_count: usize,
}

/// Basis-state distribution of `H^⊗n` followed by `layers` entangling
/// layers with the given angles, `[layer][qubit][φ, θ, ω]` flattened.
pub fn entity_view(n_qubits: usize, layers: usize, angles: &[f64]) -> Result<EntityView> {
    if n_qubits == 0 || n_qubits > MAX_DEMO_QUBITS {
        return Err(qkge::Error::Size(n_qubits));
    }
    let shape = AnsatzShape::new(n_qubits, layers);
    let circuit = entity_prep(shape, angles, None)?;
    let mut state = Statevector::zero(n_qubits)?;
    run_circuit(&mut state, &circuit, &[])?;
    Ok(EntityView {
        n_qubits,
        basis: (0..state.dim()).map(|k| format!("{k:0n_qubits$b}")).collect(),
        probabilities: state.probabilities(),
        phases: state.amplitudes().iter().map(|a| a.arg()).collect(),
        gate_count: circuit.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct BatchRow {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
    pub batched: f64,
    pub single: f64,
}

#[derive(Debug, Serialize)]
pub struct BatchView {
    pub rows: Vec<BatchRow>,
    pub max_difference: f64,
    pub qubits_batched: usize,
    pub gates_batched: usize,
    pub executions_batched: usize,
    pub executions_single: usize,
}

/// Scores `batch_size` triples of a random model two ways: one superposed
/// circuit, and one circuit per triple.
pub fn batch_view(n_qubits: usize, layers: usize, batch_size: usize, seed: u64) -> Result<BatchView> {
    if n_qubits == 0 || n_qubits > MAX_DEMO_QUBITS {
        return Err(qkge::Error::Size(n_qubits));
    }
    let (n_e, n_r) = (8, 3);
    let store = init_params(n_e, n_r, AnsatzShape::new(n_qubits, layers), AnsatzShape::new(n_qubits, 1), seed);
    // A fixed walk over ids so neighbouring seeds show different triples.
    let triples: Vec<Triple> = (0..batch_size)
        .map(|i| {
            let k = seed as usize + 3 * i;
            Triple::new(k % n_e, (k / 2) % n_r, (k * 5 + 1) % n_e)
        })
        .collect();
    let layout = BatchLayout::from_triples(n_qubits, &triples)?;
    let circuit = build_batched(&layout, &store)?;
    let (state, _) = run_batch(&circuit, &store)?;
    let batched = extract_scores(&state, &layout)?;
    let rows = triples
        .iter()
        .zip(batched)
        .map(|(t, b)| {
            Ok(BatchRow {
                head: t.head,
                relation: t.relation,
                tail: t.tail,
                batched: b,
                single: score_single(*t, &store)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_difference = rows.iter().map(|r| (r.batched - r.single).abs()).fold(0.0, f64::max);
    Ok(BatchView {
        max_difference,
        qubits_batched: layout.n_qubits(),
        gates_batched: circuit.len(),
        executions_batched: 1,
        executions_single: rows.len(),
        rows,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// `angles_json` is a JSON array of numbers.
#[wasm_bindgen(js_name = entityState)]
pub fn entity_state(n_qubits: usize, layers: usize, angles_json: &str) -> std::result::Result<String, JsError> {
    let angles: Vec<f64> = serde_json::from_str(angles_json).map_err(|e| JsError::new(&e.to_string()))?;
    to_js(entity_view(n_qubits, layers, &angles))
}

#[wasm_bindgen(js_name = batchScores)]
pub fn batch_scores(n_qubits: usize, layers: usize, batch_size: usize, seed: u32) -> std::result::Result<String, JsError> {
    to_js(batch_view(n_qubits, layers, batch_size, u64::from(seed)))
}

#[wasm_bindgen(js_name = resourceEstimate)]
pub fn resource_estimate_json(
    batch_size: usize,
    n_qubits: usize,
    entity_layers: usize,
    relation_layers: usize,
    elements: usize,
    epochs: usize,
) -> std::result::Result<String, JsError> {
    to_js(resource_estimate(batch_size, n_qubits, entity_layers, relation_layers).map(|e| e.with_workload(elements, epochs)))
}
