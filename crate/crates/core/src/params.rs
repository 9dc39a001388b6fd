//! Trainable angles for every entity and relation, plus Adam moments.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzShape;
use crate::error::{Error, Result};

/// Who a block of parameters belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    Entity(usize),
    Relation(usize),
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Entity(id) => write!(f, "entity {id}"),
            Owner::Relation(id) => write!(f, "relation {id}"),
        }
    }
}

/// Sparse gradient: only owners that appeared in a batch have an entry.
pub type Gradients = BTreeMap<Owner, Vec<f64>>;

/// Fixed-width rows of angles with per-parameter optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    rows: usize,
    row_len: usize,
    values: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: Vec<u64>,
}

impl ParamTable {
    fn new(rows: usize, row_len: usize) -> Self {
        let n = rows * row_len;
        Self {
            rows,
            row_len,
            values: vec![0.0; n],
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            steps: vec![0; n],
        }
    }

    pub(crate) fn from_parts(
        rows: usize,
        row_len: usize,
        values: Vec<f64>,
        first_moment: Vec<f64>,
        second_moment: Vec<f64>,
        steps: Vec<u64>,
    ) -> Result<Self> {
        let n = values.len();
        if n != rows * row_len
            || first_moment.len() != n
            || second_moment.len() != n
            || steps.len() != n
        {
            return Err(Error::Checkpoint("inconsistent parameter table shape".into()));
        }
        Ok(Self {
            rows,
            row_len,
            values,
            first_moment,
            second_moment,
            steps,
        })
    }

    pub fn row_len(&self) -> usize {
        self.row_len
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.row_len..(i + 1) * self.row_len]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.row_len..(i + 1) * self.row_len]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub(crate) fn optimizer_row_mut(&mut self, i: usize) -> OptimizerRow<'_> {
        let r = i * self.row_len..(i + 1) * self.row_len;
        OptimizerRow {
            values: &mut self.values[r.clone()],
            first_moment: &mut self.first_moment[r.clone()],
            second_moment: &mut self.second_moment[r.clone()],
            steps: &mut self.steps[r],
        }
    }

    /// Drops optimizer state, keeping only angles.
    pub fn reset_moments(&mut self) {
        self.first_moment.iter_mut().for_each(|m| *m = 0.0);
        self.second_moment.iter_mut().for_each(|v| *v = 0.0);
        self.steps.iter_mut().for_each(|s| *s = 0);
    }
}

pub(crate) struct OptimizerRow<'a> {
    pub values: &'a mut [f64],
    pub first_moment: &'a mut [f64],
    pub second_moment: &'a mut [f64],
    pub steps: &'a mut [u64],
}

/// Entity angles α_e and relation angles β_r, row-major in
/// `[layer][qubit][φ, θ, ω]` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore {
    entity_shape: AnsatzShape,
    relation_shape: AnsatzShape,
    entities: ParamTable,
    relations: ParamTable,
}

impl ParameterStore {
    /// All-zero store.
    pub fn zeros(
        n_entities: usize,
        n_relations: usize,
        entity_shape: AnsatzShape,
        relation_shape: AnsatzShape,
    ) -> Self {
        Self {
            entity_shape,
            relation_shape,
            entities: ParamTable::new(n_entities, entity_shape.param_count()),
            relations: ParamTable::new(n_relations, relation_shape.param_count()),
        }
    }

    pub(crate) fn from_tables(
        entity_shape: AnsatzShape,
        relation_shape: AnsatzShape,
        entities: ParamTable,
        relations: ParamTable,
    ) -> Result<Self> {
        if entities.row_len != entity_shape.param_count()
            || relations.row_len != relation_shape.param_count()
            || entity_shape.n_qubits != relation_shape.n_qubits
        {
            return Err(Error::Checkpoint("parameter rows do not match ansatz shapes".into()));
        }
        Ok(Self {
            entity_shape,
            relation_shape,
            entities,
            relations,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.entity_shape.n_qubits
    }

    pub fn entity_shape(&self) -> AnsatzShape {
        self.entity_shape
    }

    pub fn relation_shape(&self) -> AnsatzShape {
        self.relation_shape
    }

    pub fn n_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.rows()
    }

    pub fn entities(&self) -> &ParamTable {
        &self.entities
    }

    pub fn relations(&self) -> &ParamTable {
        &self.relations
    }

    pub fn total_angles(&self) -> usize {
        self.entities.values.len() + self.relations.values.len()
    }

    pub fn contains(&self, owner: Owner) -> bool {
        match owner {
            Owner::Entity(i) => i < self.n_entities(),
            Owner::Relation(i) => i < self.n_relations(),
        }
    }

    pub fn row_len(&self, owner: Owner) -> usize {
        match owner {
            Owner::Entity(_) => self.entities.row_len,
            Owner::Relation(_) => self.relations.row_len,
        }
    }

    /// Angles of `owner`, or a lookup error.
    pub fn get(&self, owner: Owner) -> Result<&[f64]> {
        if !self.contains(owner) {
            return Err(Error::Lookup {
                kind: "parameter owner",
                name: owner.to_string(),
            });
        }
        Ok(match owner {
            Owner::Entity(i) => self.entities.row(i),
            Owner::Relation(i) => self.relations.row(i),
        })
    }

    pub fn get_mut(&mut self, owner: Owner) -> Result<&mut [f64]> {
        if !self.contains(owner) {
            return Err(Error::Lookup {
                kind: "parameter owner",
                name: owner.to_string(),
            });
        }
        Ok(match owner {
            Owner::Entity(i) => self.entities.row_mut(i),
            Owner::Relation(i) => self.relations.row_mut(i),
        })
    }

    pub(crate) fn table_mut(&mut self, owner: Owner) -> (&mut ParamTable, usize) {
        match owner {
            Owner::Entity(i) => (&mut self.entities, i),
            Owner::Relation(i) => (&mut self.relations, i),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entities.values.iter().chain(&self.relations.values).all(|v| v.is_finite())
    }

    /// Flat parameter vector for a circuit's bindings.
    pub fn gather(&self, circuit: &crate::sim::Circuit) -> Result<Vec<f64>> {
        let mut params = vec![0.0; circuit.n_params()];
        for b in circuit.bindings() {
            let row = self.get(b.owner)?;
            if row.len() != b.len {
                return Err(Error::Dimension {
                    expected: b.len,
                    actual: row.len(),
                });
            }
            params[b.base..b.base + b.len].copy_from_slice(row);
        }
        Ok(params)
    }
}

/// Splits a flat circuit gradient back into per-owner rows, accumulating into
/// `into`.
pub fn scatter(circuit: &crate::sim::Circuit, grad: &[f64], scale: f64, into: &mut Gradients) {
    for b in circuit.bindings() {
        let entry = into.entry(b.owner).or_insert_with(|| vec![0.0; b.len]);
        for (acc, g) in entry.iter_mut().zip(&grad[b.base..b.base + b.len]) {
            *acc += scale * g;
        }
    }
}

/// Every angle uniform in `[0, 2π)`, drawn entity by entity and then relation
/// by relation from a generator seeded with `seed`.
pub fn init_params(
    n_entities: usize,
    n_relations: usize,
    entity_shape: AnsatzShape,
    relation_shape: AnsatzShape,
    seed: u64,
) -> ParameterStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::zeros(n_entities, n_relations, entity_shape, relation_shape);
    for v in store
        .entities
        .values
        .iter_mut()
        .chain(store.relations.values.iter_mut())
    {
        *v = rng.random_range(0.0..TAU);
    }
    store
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shapes(l_e: usize, l_r: usize) -> (AnsatzShape, AnsatzShape) {
        (AnsatzShape::new(4, l_e), AnsatzShape::new(4, l_r))
    }

    #[test]
    fn init_is_deterministic() {
        let (e, r) = shapes(2, 1);
        let a = init_params(5, 2, e, r, 11);
        let b = init_params(5, 2, e, r, 11);
        assert_eq!(a, b);
        assert_ne!(a, init_params(5, 2, e, r, 12));
    }

    #[test]
    fn umls_sized_angle_count() {
        let (e, r) = shapes(2, 1);
        let store = init_params(135, 46, e, r, 0);
        assert_eq!(store.total_angles(), 135 * 24 + 46 * 12);
        assert_eq!(store.total_angles(), 3792);
    }

    #[test]
    fn init_angles_in_range() {
        let (e, r) = shapes(4, 2);
        let store = init_params(20, 5, e, r, 3);
        let all = store.entities().values().iter().chain(store.relations().values());
        for &v in all {
            assert!((0.0..TAU).contains(&v));
        }
        assert!(store.entities().first_moment().iter().all(|&m| m == 0.0));
        assert!(store.entities().steps().iter().all(|&s| s == 0));
    }

    #[test]
    fn lookup_errors() {
        let (e, r) = shapes(1, 1);
        let store = init_params(2, 1, e, r, 0);
        assert!(store.get(Owner::Entity(1)).is_ok());
        assert!(matches!(store.get(Owner::Entity(2)), Err(Error::Lookup { .. })));
        assert!(matches!(store.get(Owner::Relation(1)), Err(Error::Lookup { .. })));
    }
}
