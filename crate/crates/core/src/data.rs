//! Triple files, vocabulary and negative sampling.
//!
//! A dataset directory holds `train.txt`, `valid.txt` and optionally
//! `test.txt`, one `head<TAB>relation<TAB>tail` triple per line.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense ids for entity and relation names, assigned in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyNames", into = "VocabularyNames")]
pub struct Vocabulary {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_ids: HashMap<String, usize>,
    relation_ids: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyNames {
    entities: Vec<String>,
    relations: Vec<String>,
}

impl From<VocabularyNames> for Vocabulary {
    fn from(names: VocabularyNames) -> Self {
        let mut v = Vocabulary::default();
        for e in &names.entities {
            v.intern_entity(e);
        }
        for r in &names.relations {
            v.intern_relation(r);
        }
        v
    }
}

impl From<Vocabulary> for VocabularyNames {
    fn from(v: Vocabulary) -> Self {
        VocabularyNames {
            entities: v.entities,
            relations: v.relations,
        }
    }
}

fn intern(names: &mut Vec<String>, ids: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    let id = names.len();
    names.push(name.to_owned());
    ids.insert(name.to_owned(), id);
    id
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_entity(&mut self, name: &str) -> usize {
        intern(&mut self.entities, &mut self.entity_ids, name)
    }

    pub fn intern_relation(&mut self, name: &str) -> usize {
        intern(&mut self.relations, &mut self.relation_ids, name)
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: usize) -> Option<&str> {
        self.entities.get(id).map(String::as_str)
    }

    pub fn relation_name(&self, id: usize) -> Option<&str> {
        self.relations.get(id).map(String::as_str)
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// A triple with its training target: 1 for known facts, 0 for corruptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub positive: bool,
}

impl LabeledTriple {
    pub fn positive(triple: Triple) -> Self {
        Self {
            triple,
            positive: true,
        }
    }

    pub fn negative(triple: Triple) -> Self {
        Self {
            triple,
            positive: false,
        }
    }

    pub fn label(&self) -> f64 {
        if self.positive {
            1.0
        } else {
            0.0
        }
    }
}

/// Parses a triple file, extending `vocab` with unseen names. Duplicates are
/// kept and order follows the file.
pub fn load_triples(path: impl AsRef<Path>, vocab: &mut Vocabulary) -> Result<Vec<Triple>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triples(&text, path, vocab)
}

pub fn parse_triples(text: &str, origin: &Path, vocab: &mut Vocabulary) -> Result<Vec<Triple>> {
    let mut triples = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message,
        };
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(bad("empty field".into()));
        }
        let head = vocab.intern_entity(fields[0]);
        let relation = vocab.intern_relation(fields[1]);
        let tail = vocab.intern_entity(fields[2]);
        triples.push(Triple::new(head, relation, tail));
    }
    Ok(triples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split `{other}` (expected train, valid or test)"
            ))),
        }
    }
}

/// All three splits over one vocabulary. Loading order is train, valid, test,
/// so ids are stable for a given directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub vocab: Vocabulary,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl Dataset {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(dir, Vocabulary::new())
    }

    /// Loads on top of an existing vocabulary (a checkpoint's). Names missing
    /// from `vocab` are rejected so ids keep matching trained parameters.
    pub fn load_frozen(dir: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let ds = Self::load_with(dir, vocab.clone())?;
        if let Some(name) = ds.vocab.entities().get(vocab.n_entities()) {
            return Err(Error::Lookup {
                kind: "entity",
                name: name.clone(),
            });
        }
        if let Some(name) = ds.vocab.relations().get(vocab.n_relations()) {
            return Err(Error::Lookup {
                kind: "relation",
                name: name.clone(),
            });
        }
        Ok(ds)
    }

    fn load_with(dir: impl AsRef<Path>, mut vocab: Vocabulary) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(Error::io(
                &root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            ));
        }
        let train = load_triples(root.join(Split::Train.file_name()), &mut vocab)?;
        let valid = load_triples(root.join(Split::Valid.file_name()), &mut vocab)?;
        let test_path = root.join(Split::Test.file_name());
        let test = if test_path.exists() {
            load_triples(test_path, &mut vocab)?
        } else {
            Vec::new()
        };
        Ok(Self {
            root,
            vocab,
            train,
            valid,
            test,
        })
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Every known positive across all splits.
    pub fn known(&self) -> HashSet<Triple> {
        self.train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .copied()
            .collect()
    }
}

/// Which end of a positive triple gets replaced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    #[default]
    Tail,
    Head,
}

const NEGATIVE_RETRIES: usize = 100;

/// `k` corruptions of `positive`, each replacing one end with a uniformly
/// drawn different entity that is not itself a known fact. After
/// `NEGATIVE_RETRIES` rejected draws the known-fact filter is dropped.
pub fn sample_negatives<R: Rng + ?Sized>(
    positive: Triple,
    n_entities: usize,
    k: usize,
    rng: &mut R,
    known: &HashSet<Triple>,
    side: Corruption,
) -> Result<Vec<LabeledTriple>> {
    if n_entities < 2 {
        return Err(Error::Sampling("need at least two entities".into()));
    }
    if k == 0 {
        return Err(Error::Sampling("negatives per positive must be at least 1".into()));
    }
    let original = match side {
        Corruption::Tail => positive.tail,
        Corruption::Head => positive.head,
    };
    let corrupt = |e: usize| match side {
        Corruption::Tail => Triple::new(positive.head, positive.relation, e),
        Corruption::Head => Triple::new(e, positive.relation, positive.tail),
    };
    let mut draw = || {
        let e = rng.random_range(0..n_entities - 1);
        corrupt(if e >= original { e + 1 } else { e })
    };
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut t = draw();
        for _ in 1..NEGATIVE_RETRIES {
            if !known.contains(&t) {
                break;
            }
            t = draw();
        }
        out.push(LabeledTriple::negative(t));
    }
    Ok(out)
}
