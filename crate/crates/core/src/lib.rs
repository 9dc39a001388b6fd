//! Knowledge graph embedding with variational quantum circuits.
//!
//! Entities are `n`-qubit states `U(α_e)·H^⊗n|0>`, relations are unitaries
//! `U(β_r)`, and a triple scores `δ = |<t|U(β_r)|h>|²`. Angles are trained
//! on a mean-squared-error loss against 0/1 labels with lazy Adam. A batch of
//! `B` triples can be scored in one execution of a circuit that superposes
//! them over a `log2 B`-qubit address register.
//!
//! Everything runs on the dense statevector simulator in [`sim`].

pub mod ansatz;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod params;
pub mod scoring;
pub mod sim;
pub mod train;

pub use ansatz::AnsatzShape;
pub use checkpoint::Checkpoint;
pub use data::{Dataset, LabeledTriple, Triple, Vocabulary};
pub use error::{Error, Result};
pub use eval::{Metrics, TiePolicy};
pub use params::{Owner, ParameterStore};
pub use sim::{Circuit, Gate, Statevector};
pub use train::{TrainConfig, Trainer};
