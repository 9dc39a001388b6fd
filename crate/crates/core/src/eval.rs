//! Filtered link prediction: rank the true tail among all entities.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{Corruption, Triple, Vocabulary};
use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::scoring::EntityStates;

/// How candidates scoring exactly like the true answer are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Ties rank ahead of the true answer.
    #[default]
    Pessimistic,
    /// Ties rank behind the true answer.
    Optimistic,
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pessimistic" => Ok(TiePolicy::Pessimistic),
            "optimistic" => Ok(TiePolicy::Optimistic),
            other => Err(Error::Config(format!("unknown tie policy `{other}`"))),
        }
    }
}

/// Rank of `scores[target]` among candidates for which `keep` holds.
/// The target itself is always kept.
pub fn rank_among<F>(scores: &[f64], target: usize, keep: F, ties: TiePolicy) -> usize
where
    F: Fn(usize) -> bool,
{
    let s = scores[target];
    let (mut above, mut tied) = (0, 0);
    for (e, &x) in scores.iter().enumerate() {
        if e == target || !keep(e) {
            continue;
        }
        if x > s {
            above += 1;
        } else if x == s {
            tied += 1;
        }
    }
    match ties {
        TiePolicy::Pessimistic => 1 + above + tied,
        TiePolicy::Optimistic => 1 + above,
    }
}

/// Every rank variant for one test triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRank {
    pub triple: Triple,
    pub pessimistic: usize,
    pub optimistic: usize,
    /// Unfiltered, pessimistic.
    pub raw: usize,
}

impl TripleRank {
    pub fn get(&self, ties: TiePolicy) -> usize {
        match ties {
            TiePolicy::Pessimistic => self.pessimistic,
            TiePolicy::Optimistic => self.optimistic,
        }
    }
}

fn rank_one(
    triple: Triple,
    side: Corruption,
    store: &ParameterStore,
    states: &EntityStates,
    known: &HashSet<Triple>,
) -> Result<TripleRank> {
    let (scores, target) = match side {
        Corruption::Tail => (states.tail_scores(store, triple.head, triple.relation)?, triple.tail),
        Corruption::Head => (states.head_scores(store, triple.relation, triple.tail)?, triple.head),
    };
    if target >= scores.len() {
        return Err(Error::Lookup {
            kind: "entity id",
            name: target.to_string(),
        });
    }
    let candidate = |e: usize| match side {
        Corruption::Tail => Triple::new(triple.head, triple.relation, e),
        Corruption::Head => Triple::new(e, triple.relation, triple.tail),
    };
    let keep = |e: usize| !known.contains(&candidate(e));
    Ok(TripleRank {
        triple,
        pessimistic: rank_among(&scores, target, keep, TiePolicy::Pessimistic),
        optimistic: rank_among(&scores, target, keep, TiePolicy::Optimistic),
        raw: rank_among(&scores, target, |_| true, TiePolicy::Pessimistic),
    })
}

/// Filtered tail rank of `triple` under `ties`.
pub fn rank_tail(
    triple: Triple,
    store: &ParameterStore,
    states: &EntityStates,
    known: &HashSet<Triple>,
    ties: TiePolicy,
) -> Result<usize> {
    Ok(rank_one(triple, Corruption::Tail, store, states, known)?.get(ties))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits10: f64,
    pub n_evaluated: usize,
    #[serde(skip)]
    pub ranks: Vec<usize>,
}

impl Metrics {
    pub fn hits_at(&self, k: usize) -> f64 {
        hits(&self.ranks, k)
    }

    pub fn percent(&self) -> MetricsPercent {
        MetricsPercent {
            mrr: to_percent(self.mrr),
            hits1: to_percent(self.hits1),
            hits10: to_percent(self.hits10),
        }
    }
}

/// Percent values rounded half-up to one decimal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsPercent {
    pub mrr: f64,
    pub hits1: f64,
    pub hits10: f64,
}

fn to_percent(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

fn hits(ranks: &[usize], k: usize) -> f64 {
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

pub fn metrics(ranks: &[usize]) -> Result<Metrics> {
    if ranks.is_empty() {
        return Err(Error::Contract("metrics need at least one rank"));
    }
    if ranks.contains(&0) {
        return Err(Error::Contract("ranks start at 1"));
    }
    let n = ranks.len() as f64;
    Ok(Metrics {
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        hits1: hits(ranks, 1),
        hits10: hits(ranks, 10),
        n_evaluated: ranks.len(),
        ranks: ranks.to_vec(),
    })
}

/// Per-triple ranks of one evaluation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub side: Corruption,
    pub ranks: Vec<TripleRank>,
}

impl Evaluation {
    pub fn ranks(&self, ties: TiePolicy) -> Vec<usize> {
        self.ranks.iter().map(|r| r.get(ties)).collect()
    }

    pub fn metrics(&self, ties: TiePolicy) -> Result<Metrics> {
        metrics(&self.ranks(ties))
    }

    pub fn raw_metrics(&self) -> Result<Metrics> {
        metrics(&self.ranks.iter().map(|r| r.raw).collect::<Vec<_>>())
    }
}

/// Ranks every triple against all entities, filtering candidates in `known`.
/// Entity states are prepared once per call.
pub fn evaluate(
    triples: &[Triple],
    store: &ParameterStore,
    known: &HashSet<Triple>,
    side: Corruption,
) -> Result<Evaluation> {
    let states = EntityStates::new(store)?;
    let one = |t: &Triple| rank_one(*t, side, store, &states, known);

    #[cfg(feature = "parallel")]
    let ranks = {
        use rayon::prelude::*;
        triples.par_iter().map(one).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let ranks = triples.iter().map(one).collect::<Result<Vec<_>>>()?;

    Ok(Evaluation { side, ranks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpRow {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub rank: usize,
    pub optimistic: usize,
    pub pessimistic: usize,
    pub raw: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    #[serde(flatten)]
    pub fraction: Metrics,
    pub percent: MetricsPercent,
}

impl From<Metrics> for MetricsBlock {
    fn from(m: Metrics) -> Self {
        let percent = m.percent();
        Self { fraction: m, percent }
    }
}

/// Structured evaluation output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub split: String,
    pub side: Corruption,
    pub ties: TiePolicy,
    /// Headline numbers under `ties`.
    pub metrics: MetricsBlock,
    pub pessimistic: MetricsBlock,
    pub optimistic: MetricsBlock,
    pub raw: MetricsBlock,
    /// Filtered rank under `ties` → number of triples.
    pub rank_histogram: BTreeMap<usize, usize>,
    pub triples: Vec<DumpRow>,
}

impl Report {
    pub fn new(split: &str, eval: &Evaluation, ties: TiePolicy, vocab: &Vocabulary) -> Result<Self> {
        let name = |kind: &'static str, n: Option<&str>, id: usize| {
            n.map(str::to_owned).ok_or(Error::Lookup {
                kind,
                name: id.to_string(),
            })
        };
        let mut rank_histogram = BTreeMap::new();
        let mut triples = Vec::with_capacity(eval.ranks.len());
        for r in &eval.ranks {
            let t = r.triple;
            *rank_histogram.entry(r.get(ties)).or_insert(0) += 1;
            triples.push(DumpRow {
                head: name("entity id", vocab.entity_name(t.head), t.head)?,
                relation: name("relation id", vocab.relation_name(t.relation), t.relation)?,
                tail: name("entity id", vocab.entity_name(t.tail), t.tail)?,
                rank: r.get(ties),
                optimistic: r.optimistic,
                pessimistic: r.pessimistic,
                raw: r.raw,
            });
        }
        Ok(Self {
            split: split.to_owned(),
            side: eval.side,
            ties,
            metrics: eval.metrics(ties)?.into(),
            pessimistic: eval.metrics(TiePolicy::Pessimistic)?.into(),
            optimistic: eval.metrics(TiePolicy::Optimistic)?.into(),
            raw: eval.raw_metrics()?.into(),
            rank_histogram,
            triples,
        })
    }
}
