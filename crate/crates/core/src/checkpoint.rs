//! Versioned JSON checkpoints.
//!
//! Floats are written in shortest round-trip form and parsed back exactly, so
//! `save → load → save` reproduces the file byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzShape;
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::params::{ParamTable, ParameterStore};
use crate::train::{RngState, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Angles of one owner as `[layer][qubit][φ, θ, ω]`.
pub type AngleTensor = Vec<Vec<[f64; 3]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub steps: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub entities: Moments,
    pub relations: Moments,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub epochs_completed: usize,
    pub vocabulary: Vocabulary,
    pub entities: Vec<AngleTensor>,
    pub relations: Vec<AngleTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerState>,
    pub rng: RngState,
}

fn to_tensors(table: &ParamTable, shape: AnsatzShape) -> Vec<AngleTensor> {
    (0..table.rows())
        .map(|i| {
            let row = table.row(i);
            (0..shape.n_layers)
                .map(|l| {
                    (0..shape.n_qubits)
                        .map(|q| {
                            let k = (l * shape.n_qubits + q) * 3;
                            [row[k], row[k + 1], row[k + 2]]
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn from_tensors(tensors: &[AngleTensor], shape: AnsatzShape, what: &str) -> Result<Vec<f64>> {
    let mut flat: Vec<f64> = Vec::with_capacity(tensors.len() * shape.param_count());
    for (i, t) in tensors.iter().enumerate() {
        if t.len() != shape.n_layers || t.iter().any(|layer| layer.len() != shape.n_qubits) {
            return Err(Error::Checkpoint(format!(
                "{what} {i} does not have shape [{}][{}][3]",
                shape.n_layers, shape.n_qubits
            )));
        }
        flat.extend(t.iter().flatten().flatten().copied());
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint(format!("{what} angles must be finite")));
    }
    Ok(flat)
}

fn moments(table: &ParamTable) -> Moments {
    Moments {
        first: table.first_moment().to_vec(),
        second: table.second_moment().to_vec(),
        steps: table.steps().to_vec(),
    }
}

fn table(rows: usize, values: Vec<f64>, row_len: usize, m: Option<&Moments>) -> Result<ParamTable> {
    let n = values.len();
    match m {
        Some(m) => ParamTable::from_parts(rows, row_len, values, m.first.clone(), m.second.clone(), m.steps.clone()),
        None => ParamTable::from_parts(rows, row_len, values, vec![0.0; n], vec![0.0; n], vec![0; n]),
    }
}

impl Checkpoint {
    pub fn new(
        config: &TrainConfig,
        vocabulary: &Vocabulary,
        store: &ParameterStore,
        epochs_completed: usize,
        rng: RngState,
        with_optimizer: bool,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            epochs_completed,
            vocabulary: vocabulary.clone(),
            entities: to_tensors(store.entities(), store.entity_shape()),
            relations: to_tensors(store.relations(), store.relation_shape()),
            optimizer: with_optimizer.then(|| OptimizerState {
                entities: moments(store.entities()),
                relations: moments(store.relations()),
            }),
            rng,
        }
    }

    /// Rebuilds the parameter store; moments are zero when none were saved.
    pub fn store(&self) -> Result<ParameterStore> {
        let e_shape = self.config.entity_shape();
        let r_shape = self.config.relation_shape();
        if self.entities.len() != self.vocabulary.n_entities()
            || self.relations.len() != self.vocabulary.n_relations()
        {
            return Err(Error::Checkpoint("parameter count differs from vocabulary".into()));
        }
        let ents = from_tensors(&self.entities, e_shape, "entity")?;
        let rels = from_tensors(&self.relations, r_shape, "relation")?;
        let opt = self.optimizer.as_ref();
        ParameterStore::from_tables(
            e_shape,
            r_shape,
            table(self.entities.len(), ents, e_shape.param_count(), opt.map(|o| &o.entities))?,
            table(self.relations.len(), rels, r_shape.param_count(), opt.map(|o| &o.relations))?,
        )
    }

    pub fn to_json(&self) -> String {
        // Every field is plain data with finite floats.
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("not valid JSON: {e}")))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Checkpoint(format!(
                    "format version {v} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Checkpoint("missing format_version".into())),
        }
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        ckpt.store()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
