//! Mean-squared-error training of entity and relation angles with lazy Adam.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzShape;
use crate::data::{sample_negatives, Corruption, LabeledTriple, Triple};
use crate::error::{Error, Result};
use crate::eval::{evaluate, TiePolicy};
use crate::params::{init_params, scatter, Gradients, ParameterStore};
use crate::scoring::{build_batched, extract_scores, run_batch, triple_circuit, BatchLayout};
use crate::sim::{adjoint_gradient, parameter_shift_gradient, DiagonalObservable, Statevector, MAX_QUBITS};

/// RNG stream used by the epoch loop; stream 0 is reserved for initialization.
const TRAIN_STREAM: u64 = 1;

const FINITE_DIFF_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Reverse-sweep differentiation of the (batched or single) circuit.
    #[default]
    Exact,
    /// Two-term shift rule on per-triple circuits.
    ParameterShiftSingle,
    /// Central differences on per-triple circuits. Slow; for debugging.
    FiniteDiffDebug,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_qubits: usize,
    pub entity_layers: usize,
    pub relation_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Triples per optimizer step, positives and negatives together.
    pub batch_size: usize,
    pub negatives: usize,
    pub seed: u64,
    pub gradient_mode: GradientMode,
    pub batched: bool,
    pub corruption: Corruption,
    /// Log validation MRR after every epoch.
    pub validate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            entity_layers: 2,
            relation_layers: 1,
            learning_rate: 0.001,
            epochs: 20,
            batch_size: 4,
            negatives: 1,
            seed: 0,
            gradient_mode: GradientMode::Exact,
            batched: true,
            corruption: Corruption::Tail,
            validate: true,
        }
    }
}

impl TrainConfig {
    pub fn entity_shape(&self) -> AnsatzShape {
        AnsatzShape::new(self.n_qubits, self.entity_layers)
    }

    pub fn relation_shape(&self) -> AnsatzShape {
        AnsatzShape::new(self.n_qubits, self.relation_layers)
    }

    /// Positives per batch; each brings `negatives` corruptions along.
    pub fn positives_per_batch(&self) -> usize {
        self.batch_size / (1 + self.negatives)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!("qubit count {} out of range", self.n_qubits)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("need at least one negative per positive".into()));
        }
        if self.batch_size == 0 || !self.batch_size.is_multiple_of(1 + self.negatives) {
            return Err(Error::Config(format!(
                "batch size {} must be a multiple of 1 + negatives ({})",
                self.batch_size,
                1 + self.negatives
            )));
        }
        if self.batched && !self.batch_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "batch size {} must be a power of two for batched scoring",
                self.batch_size
            )));
        }
        let address = self.batch_size.trailing_zeros() as usize;
        if self.batched && self.n_qubits + address > MAX_QUBITS {
            return Err(Error::Config("batched circuit exceeds simulator size".into()));
        }
        Ok(())
    }
}

/// Fresh parameters for a vocabulary of the given size.
pub fn init_store(config: &TrainConfig, n_entities: usize, n_relations: usize) -> ParameterStore {
    init_params(
        n_entities,
        n_relations,
        config.entity_shape(),
        config.relation_shape(),
        config.seed,
    )
}

/// `(1/D) Σ (δ_i − y_i)²`.
pub fn mse_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Contract("loss needs at least one triple"));
    }
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    let sum: f64 = scores.iter().zip(labels).map(|(d, y)| (d - y) * (d - y)).sum();
    Ok(sum / scores.len() as f64)
}

/// Scores, loss and sparse loss gradient of one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    pub scores: Vec<f64>,
    pub loss: f64,
    pub gradients: Gradients,
    /// Forward circuit executions spent on this batch.
    pub executions: u64,
}

/// Evaluates the batch and `dL/dθ = (2/D) Σ_i (δ_i − y_i) · dδ_i/dθ`.
///
/// With `batched` set, exact mode and a power-of-two batch, every δ_i comes
/// from one superposed circuit and the whole gradient from one reverse sweep.
/// Otherwise each triple runs its own circuit.
pub fn loss_gradient(
    batch: &[LabeledTriple],
    store: &ParameterStore,
    mode: GradientMode,
    batched: bool,
) -> Result<BatchOutcome> {
    if batch.is_empty() {
        return Err(Error::Contract("gradient needs at least one triple"));
    }
    let d = batch.len() as f64;
    let labels: Vec<f64> = batch.iter().map(LabeledTriple::label).collect();
    let mut gradients = Gradients::new();

    if batched && mode == GradientMode::Exact && batch.len().is_power_of_two() {
        let layout = BatchLayout::new(store.n_qubits(), batch.to_vec())?;
        let circuit = build_batched(&layout, store)?;
        let (state, params) = run_batch(&circuit, store)?;
        let scores = extract_scores(&state, &layout)?;
        let mut weights = vec![0.0; state.dim()];
        for (i, (s, y)) in scores.iter().zip(&labels).enumerate() {
            // (2/D)·(δ_i − y_i)·B, and B = D here.
            weights[i] = 2.0 * (s - y);
        }
        let obs = DiagonalObservable::from_weights(weights)?;
        let grad = adjoint_gradient(&circuit, &params, &state, &obs)?;
        scatter(&circuit, &grad, 1.0, &mut gradients);
        let loss = mse_loss(&scores, &labels)?;
        return Ok(BatchOutcome {
            scores,
            loss,
            gradients,
            executions: 1,
        });
    }

    let mut scores = Vec::with_capacity(batch.len());
    let mut executions = 0u64;
    for (lt, y) in batch.iter().zip(&labels) {
        let circuit = triple_circuit(lt.triple, store)?;
        let (state, params) = run_batch(&circuit, store)?;
        executions += 1;
        let score = state.amplitudes()[0].norm_sqr();
        let coeff = 2.0 / d * (score - y);
        let grad = match mode {
            GradientMode::Exact => {
                adjoint_gradient(&circuit, &params, &state, &zero_projector(state.dim())?)?
            }
            GradientMode::ParameterShiftSingle => {
                let g = parameter_shift_gradient(&circuit, &params, &zero_projector(state.dim())?)?;
                executions += 2 * 3 * rotation_count(&circuit) as u64;
                g
            }
            GradientMode::FiniteDiffDebug => {
                let g = finite_difference(&circuit, &params)?;
                executions += 2 * params.len() as u64;
                g
            }
        };
        scatter(&circuit, &grad, coeff, &mut gradients);
        scores.push(score);
    }
    let loss = mse_loss(&scores, &labels)?;
    Ok(BatchOutcome {
        scores,
        loss,
        gradients,
        executions,
    })
}

fn zero_projector(dim: usize) -> Result<DiagonalObservable> {
    let mut w = vec![0.0; dim];
    w[0] = 1.0;
    DiagonalObservable::from_weights(w)
}

fn rotation_count(circuit: &crate::sim::Circuit) -> usize {
    circuit
        .gates()
        .iter()
        .filter(|g| matches!(g.kind, crate::sim::GateKind::Rot { .. }))
        .count()
}

fn finite_difference(circuit: &crate::sim::Circuit, params: &[f64]) -> Result<Vec<f64>> {
    let p0 = |p: &[f64]| -> Result<f64> {
        let mut s = Statevector::zero(circuit.n_qubits())?;
        crate::sim::run_circuit(&mut s, circuit, p)?;
        Ok(s.amplitudes()[0].norm_sqr())
    };
    let mut shifted = params.to_vec();
    (0..params.len())
        .map(|k| {
            shifted[k] = params[k] + FINITE_DIFF_STEP;
            let plus = p0(&shifted)?;
            shifted[k] = params[k] - FINITE_DIFF_STEP;
            let minus = p0(&shifted)?;
            shifted[k] = params[k];
            Ok((plus - minus) / (2.0 * FINITE_DIFF_STEP))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Lazy Adam: only owners present in `grads` touch their moments and step
/// counters. Bias correction uses each parameter's own step count.
pub fn adam_step(store: &mut ParameterStore, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    for (&owner, g) in grads {
        if !store.contains(owner) {
            return Err(Error::Lookup {
                kind: "parameter owner",
                name: owner.to_string(),
            });
        }
        if g.len() != store.row_len(owner) {
            return Err(Error::Dimension {
                expected: store.row_len(owner),
                actual: g.len(),
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { owner });
        }
    }
    for (&owner, g) in grads {
        let (table, row) = store.table_mut(owner);
        let r = table.optimizer_row_mut(row);
        for (k, &gk) in g.iter().enumerate() {
            r.steps[k] += 1;
            let t = i32::try_from(r.steps[k]).unwrap_or(i32::MAX);
            r.first_moment[k] = cfg.beta1 * r.first_moment[k] + (1.0 - cfg.beta1) * gk;
            r.second_moment[k] = cfg.beta2 * r.second_moment[k] + (1.0 - cfg.beta2) * gk * gk;
            let m_hat = r.first_moment[k] / (1.0 - cfg.beta1.powi(t));
            let v_hat = r.second_moment[k] / (1.0 - cfg.beta2.powi(t));
            r.values[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub valid_mrr: Option<f64>,
    pub wall_seconds: f64,
    pub circuit_executions: u64,
    pub batches: usize,
}

impl EpochRecord {
    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.mean_loss.to_bits() == other.mean_loss.to_bits()
            && self.valid_mrr.map(f64::to_bits) == other.valid_mrr.map(f64::to_bits)
            && self.circuit_executions == other.circuit_executions
            && self.batches == other.batches
    }
}

/// Position of the training RNG, enough to resume the exact stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    /// 128-bit ChaCha word position as a decimal string.
    pub word_pos: String,
}

impl RngState {
    fn capture(seed: u64, rng: &ChaCha8Rng) -> Self {
        Self {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad RNG word position `{}`", self.word_pos)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Epoch loop state: parameters, optimizer moments and the sampling stream.
pub struct Trainer {
    config: TrainConfig,
    store: ParameterStore,
    rng: ChaCha8Rng,
    n_entities: usize,
    positives: Vec<Triple>,
    valid: Vec<Triple>,
    known: HashSet<Triple>,
    epochs_done: usize,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        n_entities: usize,
        n_relations: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
    ) -> Result<Self> {
        config.validate()?;
        let store = init_store(&config, n_entities, n_relations);
        Self::resume(config, store, None, 0, train, valid)
    }

    /// Continues from saved parameters; `rng = None` starts the sampling
    /// stream from the beginning.
    pub fn resume(
        config: TrainConfig,
        store: ParameterStore,
        rng: Option<RngState>,
        epochs_done: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
    ) -> Result<Self> {
        config.validate()?;
        let n_entities = store.n_entities();
        for t in train.iter().chain(&valid) {
            if t.head >= n_entities || t.tail >= n_entities || t.relation >= store.n_relations() {
                return Err(Error::Lookup {
                    kind: "triple",
                    name: format!("({}, {}, {})", t.head, t.relation, t.tail),
                });
            }
        }
        let rng = match rng {
            Some(state) => state.restore()?,
            None => {
                let mut r = ChaCha8Rng::seed_from_u64(config.seed);
                r.set_stream(TRAIN_STREAM);
                r
            }
        };
        let known = train.iter().copied().collect();
        Ok(Self {
            config,
            store,
            rng,
            n_entities,
            positives: train,
            valid,
            known,
            epochs_done,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn into_store(self) -> ParameterStore {
        self.store
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(self.config.seed, &self.rng)
    }

    fn assemble(&mut self, chunk: &[Triple]) -> Result<Vec<LabeledTriple>> {
        let mut batch = Vec::with_capacity(chunk.len() * (1 + self.config.negatives));
        for &pos in chunk {
            batch.push(LabeledTriple::positive(pos));
            batch.extend(sample_negatives(
                pos,
                self.n_entities,
                self.config.negatives,
                &mut self.rng,
                &self.known,
                self.config.corruption,
            )?);
        }
        Ok(batch)
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let started = Instant::now();
        let mut order = self.positives.clone();
        order.shuffle(&mut self.rng);
        let adam = AdamConfig::new(self.config.learning_rate);
        let per_batch = self.config.positives_per_batch().max(1);

        let (mut loss_sum, mut count, mut executions, mut batches) = (0.0, 0usize, 0u64, 0usize);
        for chunk in order.chunks(per_batch) {
            let batch = self.assemble(chunk)?;
            // A short trailing batch goes through the per-triple path.
            let full = batch.len() == self.config.batch_size;
            let out = loss_gradient(
                &batch,
                &self.store,
                self.config.gradient_mode,
                self.config.batched && full,
            )?;
            adam_step(&mut self.store, &out.gradients, &adam)?;
            loss_sum += out.loss * batch.len() as f64;
            count += batch.len();
            executions += out.executions;
            batches += 1;
        }
        self.epochs_done += 1;

        let valid_mrr = if self.config.validate && !self.valid.is_empty() {
            let known: HashSet<Triple> = self.known.iter().chain(&self.valid).copied().collect();
            let eval = evaluate(&self.valid, &self.store, &known, Corruption::Tail)?;
            Some(eval.metrics(TiePolicy::Pessimistic)?.mrr)
        } else {
            None
        };

        Ok(EpochRecord {
            epoch: self.epochs_done,
            mean_loss: if count == 0 { 0.0 } else { loss_sum / count as f64 },
            valid_mrr,
            wall_seconds: started.elapsed().as_secs_f64(),
            circuit_executions: executions,
            batches,
        })
    }
}

/// Runs `config.epochs` epochs, calling `on_epoch` after each one.
pub fn train<F>(
    config: &TrainConfig,
    n_entities: usize,
    n_relations: usize,
    train: &[Triple],
    valid: &[Triple],
    mut on_epoch: F,
) -> Result<(ParameterStore, Vec<EpochRecord>)>
where
    F: FnMut(&EpochRecord, &Trainer) -> Result<()>,
{
    let mut trainer = Trainer::new(config.clone(), n_entities, n_relations, train.to_vec(), valid.to_vec())?;
    let mut log = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let record = trainer.run_epoch()?;
        on_epoch(&record, &trainer)?;
        log.push(record);
    }
    Ok((trainer.into_store(), log))
}
