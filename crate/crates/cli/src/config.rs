//! Effective run configuration: flags over config file over defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qkge::data::Corruption;
use qkge::train::{GradientMode, TrainConfig};
use qkge::TiePolicy;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Ties {
    Pessimistic,
    Optimistic,
}

impl From<Ties> for TiePolicy {
    fn from(t: Ties) -> Self {
        match t {
            Ties::Pessimistic => TiePolicy::Pessimistic,
            Ties::Optimistic => TiePolicy::Optimistic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Tail,
    Head,
}

impl From<Side> for Corruption {
    fn from(s: Side) -> Self {
        match s {
            Side::Tail => Corruption::Tail,
            Side::Head => Corruption::Head,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Gradient {
    Exact,
    ParameterShift,
    FiniteDiff,
}

impl From<Gradient> for GradientMode {
    fn from(g: Gradient) -> Self {
        match g {
            Gradient::Exact => GradientMode::Exact,
            Gradient::ParameterShift => GradientMode::ParameterShiftSingle,
            Gradient::FiniteDiff => GradientMode::FiniteDiffDebug,
        }
    }
}

/// Training hyperparameters. Unset flags fall back to `--config`, then to
/// the built-in defaults (4 qubits, 2 entity layers, 1 relation layer,
/// lr 0.001, 20 epochs, 4-triple batched scoring, 1 negative per positive).
#[derive(Args, Clone, Debug, Default)]
pub struct ModelArgs {
    /// JSON file with any subset of the training settings.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Data qubits per entity state [default: 4]
    #[arg(long)]
    pub qubits: Option<usize>,
    /// Entity ansatz layers [default: 2]
    #[arg(long)]
    pub layers: Option<usize>,
    /// Relation ansatz layers [default: 1]
    #[arg(long)]
    pub relation_layers: Option<usize>,
    /// Training epochs [default: 20]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Triples per optimizer step, positives plus negatives [default: 4]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Negatives sampled per positive [default: 1]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Score each batch in one superposed circuit [default: on]
    #[arg(long, value_enum)]
    pub batched: Option<OnOff>,
    /// Gradient method [default: exact]
    #[arg(long, value_enum)]
    pub gradient: Option<Gradient>,
    /// Which end negatives corrupt [default: tail]
    #[arg(long, value_enum)]
    pub corrupt: Option<Side>,
    /// Seed for initialization, shuffling and negative sampling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the per-epoch validation MRR
    #[arg(long)]
    pub no_validate: bool,
}

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Parse(PathBuf, serde_json::Error),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "{}: {e}", p.display()),
            ConfigError::Parse(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

fn load_file(path: &Path) -> Result<TrainConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_owned(), e))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse(path.to_owned(), e))
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<TrainConfig, ConfigError> {
        let mut c = match &self.config {
            Some(path) => load_file(path)?,
            None => TrainConfig::default(),
        };
        macro_rules! take {
            ($flag:expr, $field:ident) => {
                if let Some(v) = $flag {
                    c.$field = v.into();
                }
            };
        }
        take!(self.qubits, n_qubits);
        take!(self.layers, entity_layers);
        take!(self.relation_layers, relation_layers);
        take!(self.epochs, epochs);
        take!(self.lr, learning_rate);
        take!(self.batch_size, batch_size);
        take!(self.negatives, negatives);
        take!(self.seed, seed);
        take!(self.gradient, gradient_mode);
        take!(self.corrupt, corruption);
        if let Some(b) = self.batched {
            c.batched = b == OnOff::On;
        }
        if self.no_validate {
            c.validate = false;
        }
        Ok(c)
    }
}

/// Everything a training run used, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a> {
    pub data: &'a Path,
    pub out: &'a Path,
    pub train: &'a TrainConfig,
}
