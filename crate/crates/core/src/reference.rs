//! Gold triplet store and in-context demonstration examples.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityName, RelationName};
use crate::text::normalize;

pub const DEFAULT_RELATION_EXAMPLES: usize = 7;
pub const DEFAULT_OBJECT_EXAMPLES: usize = 8;

/// The answer string used for abstention demonstrations.
pub const DONT_KNOW: &str = "Don't know";

const RELATION_FIXTURE: &str = include_str!("../fixtures/relation_generation.txt");
const PURE_OBJECT_FIXTURE: &str = include_str!("../fixtures/pure_object_generation.txt");
const DK_OBJECT_FIXTURE: &str = include_str!("../fixtures/dk_object_generation.txt");

/// One `(query, answer)` demonstration pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InContextExample {
    query: String,
    answer: String,
}

impl InContextExample {
    pub fn new(query: impl Into<String>, answer: impl Into<String>) -> Result<Self> {
        let query = query.into();
        let answer = answer.into();
        for (field, value) in [("query", &query), ("answer", &answer)] {
            if value.trim().is_empty() {
                return Err(Error::InvalidExample(format!("empty {field}")));
            }
            if value.contains(['\n', '\r']) {
                return Err(Error::InvalidExample(format!(
                    "{field} {value:?} contains a line break"
                )));
            }
        }
        Ok(Self { query, answer })
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn answer(&self) -> &str {
        &self.answer
    }

    pub fn is_dont_know(&self) -> bool {
        self.answer == DONT_KNOW
    }
}

/// A subject/relation pair with all of its gold objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceFact {
    pub subject: EntityName,
    pub relation: RelationName,
    pub objects: Vec<EntityName>,
}

impl ReferenceFact {
    /// `"subject # relation"`, the object-generation query for this pair.
    pub fn query(&self) -> String {
        format!("{} # {}", self.subject, self.relation)
    }

    pub fn answer(&self) -> String {
        join_list(self.objects.iter().map(EntityName::as_str))
    }
}

pub(crate) fn join_list<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    items.into_iter().collect::<Vec<_>>().join(" # ")
}

/// Line-level problems seen while loading in lenient mode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub lines_read: usize,
    pub malformed: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Default)]
pub struct ReferenceKb {
    facts: Vec<ReferenceFact>,
    by_pair: HashMap<(String, String), usize>,
    by_subject: IndexMap<String, Vec<usize>>,
    report: LoadReport,
}

impl ReferenceKb {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one gold triplet, grouping objects under an existing `(s, r)` pair.
    pub fn add(&mut self, subject: EntityName, relation: RelationName, object: EntityName) {
        let pair = (subject.normalized(), relation.normalized());
        match self.by_pair.get(&pair) {
            Some(&idx) => {
                let fact = &mut self.facts[idx];
                let key = object.normalized();
                if !fact.objects.iter().any(|o| o.normalized() == key) {
                    fact.objects.push(object);
                }
            }
            None => {
                let idx = self.facts.len();
                self.by_subject.entry(pair.0.clone()).or_default().push(idx);
                self.by_pair.insert(pair, idx);
                self.facts.push(ReferenceFact {
                    subject,
                    relation,
                    objects: vec![object],
                });
            }
        }
    }

    pub fn from_reader<R: BufRead>(input: R, origin: &Path, strict: bool) -> Result<Self> {
        let mut kb = Self::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line_no = idx + 1;
            kb.report.lines_read += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_tsv_line(&line) {
                Ok((s, r, o)) => kb.add(s, r, o),
                Err(message) if strict => {
                    return Err(Error::Parse {
                        path: origin.to_path_buf(),
                        line: line_no,
                        message,
                    })
                }
                Err(message) => {
                    log::warn!("{}:{line_no}: skipping malformed line: {message}", origin.display());
                    kb.report.malformed.push((line_no, message));
                }
            }
        }
        Ok(kb)
    }

    pub fn facts(&self) -> &[ReferenceFact] {
        &self.facts
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn subject_count(&self) -> usize {
        self.by_subject.len()
    }

    pub fn get(&self, subject: &str, relation: &str) -> Option<&ReferenceFact> {
        self.by_pair
            .get(&(normalize(subject), normalize(relation)))
            .map(|&i| &self.facts[i])
    }

    pub fn facts_for(&self, subject: &str) -> impl Iterator<Item = &ReferenceFact> {
        self.by_subject
            .get(&normalize(subject))
            .into_iter()
            .flatten()
            .map(|&i| &self.facts[i])
    }

    /// Number of `(relation, object)` pairs recorded for `subject`.
    pub fn fact_count(&self, subject: &str) -> usize {
        self.facts_for(subject).map(|f| f.objects.len()).sum()
    }

    pub fn triple_count(&self) -> usize {
        self.facts.iter().map(|f| f.objects.len()).sum()
    }

    /// `k` relation-generation demonstrations from distinct random subjects.
    pub fn sample_relation_examples(&self, k: usize, rng_seed: u64) -> Result<Vec<InContextExample>> {
        if self.by_subject.len() < k {
            return Err(Error::Insufficient {
                what: "reference subjects",
                needed: k,
                available: self.by_subject.len(),
            });
        }
        let subjects: Vec<&Vec<usize>> = self.by_subject.values().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        subjects
            .choose_multiple(&mut rng, k)
            .map(|idxs| {
                let first = &self.facts[idxs[0]];
                let answer = join_list(idxs.iter().map(|&i| self.facts[i].relation.as_str()));
                InContextExample::new(first.subject.as_str(), answer)
            })
            .collect()
    }

    /// `k` object-generation demonstrations from distinct random `(s, r)` facts.
    pub fn sample_object_examples(&self, k: usize, rng_seed: u64) -> Result<Vec<InContextExample>> {
        if self.facts.len() < k {
            return Err(Error::Insufficient {
                what: "reference facts",
                needed: k,
                available: self.facts.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        self.facts
            .choose_multiple(&mut rng, k)
            .map(|f| InContextExample::new(f.query(), f.answer()))
            .collect()
    }
}

fn parse_tsv_line(line: &str) -> std::result::Result<(EntityName, RelationName, EntityName), String> {
    let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
    if cols.len() != 3 {
        return Err(format!("expected 3 tab-separated columns, found {}", cols.len()));
    }
    let s = EntityName::new(cols[0]).map_err(|e| e.to_string())?;
    let r = RelationName::new(cols[1]).map_err(|e| e.to_string())?;
    let o = EntityName::new(cols[2]).map_err(|e| e.to_string())?;
    Ok((s, r, o))
}

/// Loads a `subject<TAB>relation<TAB>object` file. In strict mode the first
/// malformed line is an error; otherwise malformed lines are recorded in
/// [`ReferenceKb::report`].
pub fn load_reference_kb(path: &Path, strict: bool) -> Result<ReferenceKb> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ReferenceKb::from_reader(std::io::BufReader::new(file), path, strict)
}

/// Parses `Q:`/`A:` line pairs separated by blank lines.
pub fn parse_examples(text: &str, origin: &Path) -> Result<Vec<InContextExample>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            if let Some((at, _)) = pending {
                return Err(parse_err(at, "question without an answer".into()));
            }
            continue;
        }
        if let Some(q) = line.strip_prefix("Q:") {
            if let Some((at, _)) = pending {
                return Err(parse_err(at, "question without an answer".into()));
            }
            pending = Some((line_no, q.strip_prefix(' ').unwrap_or(q).to_owned()));
        } else if let Some(a) = line.strip_prefix("A:") {
            let (_, q) = pending
                .take()
                .ok_or_else(|| parse_err(line_no, "answer without a question".into()))?;
            let answer = a.strip_prefix(' ').unwrap_or(a);
            out.push(InContextExample::new(q, answer).map_err(|e| parse_err(line_no, e.to_string()))?);
        } else {
            return Err(parse_err(line_no, format!("expected a `Q:` or `A:` line, found {line:?}")));
        }
    }
    if let Some((at, _)) = pending {
        return Err(parse_err(at, "question without an answer".into()));
    }
    Ok(out)
}

pub fn load_fixed_examples(path: &Path) -> Result<Vec<InContextExample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_examples(&text, path)
}

/// Serializes examples in the fixture layout read by [`parse_examples`].
pub fn format_examples(examples: &[InContextExample]) -> String {
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "Q: {}\nA: {}", ex.query, ex.answer).unwrap();
    }
    out
}

pub fn write_examples(path: &Path, examples: &[InContextExample]) -> Result<()> {
    std::fs::write(path, format_examples(examples)).map_err(|e| Error::io(path, e))
}

fn builtin(text: &str, name: &str) -> Vec<InContextExample> {
    parse_examples(text, Path::new(name)).expect("shipped fixtures parse")
}

/// The shipped relation-generation demonstrations (7 examples).
pub fn default_relation_examples() -> Vec<InContextExample> {
    builtin(RELATION_FIXTURE, "relation_generation.txt")
}

/// The shipped pure object-generation demonstrations (8 examples).
pub fn default_pure_object_examples() -> Vec<InContextExample> {
    builtin(PURE_OBJECT_FIXTURE, "pure_object_generation.txt")
}

/// The shipped abstention-aware object-generation demonstrations (10 examples).
pub fn default_dk_object_examples() -> Vec<InContextExample> {
    builtin(DK_OBJECT_FIXTURE, "dk_object_generation.txt")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb(text: &str) -> ReferenceKb {
        ReferenceKb::from_reader(text.as_bytes(), Path::new("kb.tsv"), true).unwrap()
    }

    #[test]
    fn groups_objects_by_pair() {
        let kb = kb("A\tr\tx\nA\tr\ty\nA\tr\tz\n");
        assert_eq!(kb.facts().len(), 1);
        assert_eq!(kb.facts()[0].objects.len(), 3);
        assert_eq!(kb.fact_count("a"), 3);
    }

    #[test]
    fn duplicate_objects_collapse() {
        let kb = kb("A\tr\tItaly\nA\tr\titaly.\n");
        assert_eq!(kb.facts()[0].objects.len(), 1);
    }

    #[test]
    fn empty_file() {
        let kb = kb("");
        assert_eq!(kb.facts().len(), 0);
        assert_eq!(kb.triple_count(), 0);
        assert_eq!(kb.fact_count("anything"), 0);
    }

    #[test]
    fn strict_mode_names_line() {
        let err = ReferenceKb::from_reader("A\tr\tx\nB\tr\n".as_bytes(), Path::new("kb.tsv"), true)
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_counts_malformed() {
        let kb = ReferenceKb::from_reader(
            "A\tr\tx\nB\tr\n\nC\tr#x\ty\n".as_bytes(),
            Path::new("kb.tsv"),
            false,
        )
        .unwrap();
        assert_eq!(kb.facts().len(), 1);
        let lines: Vec<usize> = kb.report().malformed.iter().map(|m| m.0).collect();
        assert_eq!(lines, vec![2, 4]);
    }

    #[test]
    fn relation_examples_join_in_order() {
        let kb = kb("X\tcountry\tA\nX\tcapital of\tB\n");
        let ex = kb.sample_relation_examples(1, 3).unwrap();
        assert_eq!(ex[0].query(), "X");
        assert_eq!(ex[0].answer(), "country # capital of");
    }

    #[test]
    fn object_examples_join_objects() {
        let kb = kb("Johnny Depp\tchildren\tJack Depp\nJohnny Depp\tchildren\tLily-Rose Depp\nM\tcountry\tItaly\n");
        let mut ex = kb.sample_object_examples(2, 9).unwrap();
        ex.sort_by(|a, b| a.query().cmp(b.query()));
        assert_eq!(ex[0].query(), "Johnny Depp # children");
        assert_eq!(ex[0].answer(), "Jack Depp # Lily-Rose Depp");
        assert_eq!(ex[1].answer(), "Italy");
    }

    #[test]
    fn sampling_is_seeded_and_without_replacement() {
        let mut text = String::new();
        for i in 0..30 {
            writeln!(text, "S{i}\tr{i}\to{i}").unwrap();
        }
        let kb = kb(&text);
        let a = kb.sample_relation_examples(7, 42).unwrap();
        assert_eq!(a, kb.sample_relation_examples(7, 42).unwrap());
        assert_eq!(a.len(), 7);
        let mut qs: Vec<&str> = a.iter().map(|e| e.query()).collect();
        qs.sort();
        qs.dedup();
        assert_eq!(qs.len(), 7);
        assert_eq!(kb.sample_object_examples(8, 1).unwrap().len(), 8);
        assert!(matches!(
            kb.sample_object_examples(31, 1),
            Err(Error::Insufficient { needed: 31, available: 30, .. })
        ));
    }

    #[test]
    fn shipped_fixtures() {
        let rel = default_relation_examples();
        assert_eq!(rel.len(), 7);
        assert_eq!(rel[0].query(), "Javier Culson");
        let pure = default_pure_object_examples();
        assert_eq!(pure.len(), 8);
        assert_eq!(pure[0].query(), "Kristin von der Goltz # mother");
        let dk = default_dk_object_examples();
        assert_eq!(dk.len(), 10);
        assert_eq!(dk.iter().filter(|e| e.is_dont_know()).count(), 5);
    }

    #[test]
    fn fixture_format_round_trips() {
        let ex = default_dk_object_examples();
        let text = format_examples(&ex);
        assert_eq!(text, DK_OBJECT_FIXTURE);
        assert_eq!(parse_examples(&text, Path::new("x")).unwrap(), ex);
    }

    #[test]
    fn example_parse_errors() {
        assert!(parse_examples("Q: a\n\nA: b\n", Path::new("f")).is_err());
        assert!(parse_examples("A: b\n", Path::new("f")).is_err());
        let err = parse_examples("Q: a\nA: b\n\nnoise\n", Path::new("f")).unwrap_err();
        assert!(err.to_string().starts_with("f:4:"));
    }

    #[test]
    fn example_rejects_newlines() {
        assert!(InContextExample::new("a\nb", "c").is_err());
        assert!(InContextExample::new("a", " ").is_err());
    }
}
