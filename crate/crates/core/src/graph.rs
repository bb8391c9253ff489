//! Knowledge-graph data model, fact deduplication, and graph exports.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize, token_f1};

/// Near-duplicate threshold: a fact is dropped when its F1 against an
/// already-kept fact is strictly greater than this.
pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.85;

fn validate_name(kind: &'static str, text: &str) -> Result<String> {
    let trimmed = text.trim();
    let reason = if trimmed.is_empty() {
        Some("empty")
    } else if trimmed.contains('#') {
        Some("contains the list separator '#'")
    } else if trimmed.chars().any(char::is_control) {
        Some("contains a control character")
    } else {
        None
    };
    match reason {
        Some(reason) => Err(Error::InvalidName {
            kind,
            text: text.to_owned(),
            reason,
        }),
        None => Ok(trimmed.to_owned()),
    }
}

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident, $kind:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(text: impl AsRef<str>) -> Result<Self> {
                validate_name($kind, text.as_ref()).map(Self)
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            pub fn normalized(&self) -> String {
                normalize(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;

            fn try_from(value: String) -> Result<Self> {
                Self::new(value)
            }
        }

        impl TryFrom<&str> for $name {
            type Error = Error;

            fn try_from(value: &str) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> String {
                value.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

name_type!(
    /// A node label. Trimmed, non-empty, free of `#` and control characters.
    EntityName,
    "entity name"
);
name_type!(
    /// An edge label, with the same character rules as [`EntityName`].
    RelationName,
    "relation name"
);

/// The subject and relation surface forms that were queried together.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Realization {
    pub subject: String,
    pub relation: String,
}

impl Realization {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
        }
    }
}

/// One `(subject, relation, object)` fact and the realizations that voted for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: EntityName,
    pub relation: RelationName,
    pub object: EntityName,
    pub depth: u32,
    pub votes: usize,
    pub provenance: Vec<Realization>,
}

impl Triplet {
    /// Builds a triplet whose vote count is the number of distinct provenance pairs.
    pub fn new(
        subject: EntityName,
        relation: RelationName,
        object: EntityName,
        depth: u32,
        provenance: Vec<Realization>,
    ) -> Self {
        let mut t = Self {
            subject,
            relation,
            object,
            depth: depth.max(1),
            votes: 0,
            provenance: Vec::new(),
        };
        t.absorb_provenance(provenance);
        if t.provenance.is_empty() {
            t.provenance
                .push(Realization::new(t.subject.as_str(), t.relation.as_str()));
            t.votes = 1;
        }
        t
    }

    pub fn key(&self) -> String {
        fact_key(self)
    }

    fn absorb_provenance(&mut self, pairs: impl IntoIterator<Item = Realization>) {
        for p in pairs {
            if !self.provenance.contains(&p) {
                self.provenance.push(p);
            }
        }
        self.votes = self.provenance.len();
    }

    fn merge(&mut self, other: &Triplet) {
        self.depth = self.depth.min(other.depth);
        self.absorb_provenance(other.provenance.iter().cloned());
    }
}

/// `normalize(s) # normalize(r) # normalize(o)`.
pub fn fact_key(t: &Triplet) -> String {
    format!(
        "{} # {} # {}",
        t.subject.normalized(),
        t.relation.normalized(),
        t.object.normalized()
    )
}

/// Removes near-duplicate facts in one pass over the input order.
///
/// A fact survives iff its key F1 against every previously kept fact is at
/// most `threshold`. A dropped fact's provenance is merged into the first
/// kept fact that exceeded the threshold.
pub fn dedup_facts(facts: Vec<Triplet>, threshold: f64) -> Vec<Triplet> {
    let mut kept: Vec<(String, Triplet)> = Vec::with_capacity(facts.len());
    for fact in facts {
        let key = fact_key(&fact);
        match kept
            .iter_mut()
            .find(|(k, _)| token_f1(&key, k) > threshold)
        {
            Some((_, survivor)) => survivor.merge(&fact),
            None => kept.push((key, fact)),
        }
    }
    kept.into_iter().map(|(_, t)| t).collect()
}

/// A seed entity and the deduplicated facts discovered around it.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    seed: EntityName,
    triplets: Vec<Triplet>,
    by_key: HashMap<String, usize>,
    entities: IndexMap<String, EntityName>,
    relations: IndexMap<String, RelationName>,
}

impl KnowledgeGraph {
    pub fn new(seed: EntityName) -> Self {
        let mut entities = IndexMap::new();
        entities.insert(seed.normalized(), seed.clone());
        Self {
            seed,
            triplets: Vec::new(),
            by_key: HashMap::new(),
            entities,
            relations: IndexMap::new(),
        }
    }

    pub fn from_triplets(seed: EntityName, triplets: impl IntoIterator<Item = Triplet>) -> Self {
        let mut g = Self::new(seed);
        for t in triplets {
            g.insert(t);
        }
        g
    }

    /// Adds a fact. An exact duplicate (same normalized key) is merged into
    /// the existing triplet, accumulating its provenance.
    pub fn insert(&mut self, triplet: Triplet) {
        let key = fact_key(&triplet);
        if let Some(&idx) = self.by_key.get(&key) {
            self.triplets[idx].merge(&triplet);
            return;
        }
        self.entities
            .entry(triplet.subject.normalized())
            .or_insert_with(|| triplet.subject.clone());
        self.entities
            .entry(triplet.object.normalized())
            .or_insert_with(|| triplet.object.clone());
        self.relations
            .entry(triplet.relation.normalized())
            .or_insert_with(|| triplet.relation.clone());
        self.by_key.insert(key, self.triplets.len());
        self.triplets.push(triplet);
    }

    /// Applies [`dedup_facts`] and rebuilds every index from the survivors.
    pub fn dedup(&mut self, threshold: f64) {
        let facts = std::mem::take(&mut self.triplets);
        *self = Self::from_triplets(self.seed.clone(), dedup_facts(facts, threshold));
    }

    pub fn seed(&self) -> &EntityName {
        &self.seed
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityName> {
        self.entities.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationName> {
        self.relations.values()
    }

    pub fn contains_entity(&self, name: &str) -> bool {
        self.entities.contains_key(&normalize(name))
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn max_depth(&self) -> u32 {
        self.triplets.iter().map(|t| t.depth).max().unwrap_or(0)
    }

    /// Triplet counts per hop, ascending by depth.
    pub fn depth_counts(&self) -> Vec<(u32, usize)> {
        let mut counts: std::collections::BTreeMap<u32, usize> = Default::default();
        for t in &self.triplets {
            *counts.entry(t.depth).or_default() += 1;
        }
        counts.into_iter().collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.triplets {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Renders a DOT digraph: one node per entity, one labeled edge per triplet.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph kg {\n");
        let ids: HashMap<&str, usize> = self
            .entities
            .keys()
            .enumerate()
            .map(|(i, k)| (k.as_str(), i))
            .collect();
        for (i, entity) in self.entities.values().enumerate() {
            let shape = if i == 0 { ", shape=doublecircle" } else { "" };
            writeln!(out, "  n{i} [label=\"{}\"{shape}];", escape_dot(entity.as_str())).unwrap();
        }
        for t in &self.triplets {
            let s = ids[t.subject.normalized().as_str()];
            let o = ids[t.object.normalized().as_str()];
            writeln!(
                out,
                "  n{s} -> n{o} [label=\"{}\"];",
                escape_dot(t.relation.as_str())
            )
            .unwrap();
        }
        out.push_str("}\n");
        out
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Reads triplets written by [`KnowledgeGraph::write_jsonl`]. Blank lines are skipped.
pub fn read_triplets<R: BufRead>(input: R, origin: &std::path::Path) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Triplet = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if t.votes != t.provenance.len() || t.depth == 0 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: "votes must equal provenance length and depth must be >= 1".into(),
            });
        }
        out.push(t);
    }
    Ok(out)
}

/// The crawl seed of a serialized graph: the subject of the first depth-1
/// triplet, falling back to the first triplet's subject.
pub fn infer_seed(triplets: &[Triplet]) -> Option<EntityName> {
    triplets
        .iter()
        .find(|t| t.depth == 1)
        .or_else(|| triplets.first())
        .map(|t| t.subject.clone())
}

/// Loads a JSON-lines graph. `seed` overrides inference and is required for
/// an empty file.
pub fn load_graph(path: &std::path::Path, seed: Option<EntityName>) -> Result<KnowledgeGraph> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let triplets = read_triplets(std::io::BufReader::new(file), path)?;
    let seed = seed
        .or_else(|| infer_seed(&triplets))
        .ok_or_else(|| Error::Config(format!("{}: cannot infer the seed of an empty graph", path.display())))?;
    Ok(KnowledgeGraph::from_triplets(seed, triplets))
}
