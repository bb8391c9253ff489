//! Entity expansion and breadth-first crawling.
//!
//! Expanding an entity runs four steps: subject paraphrasing, relation
//! generation over every subject realization, relation paraphrasing, and
//! object generation over the cross product of subject and relation
//! realizations. Objects are kept only when enough realizations agree.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{
    CompletionBackend, CompletionRequest, Decoding, LIST_MAX_TOKENS, PARAPHRASE_MAX_TOKENS,
    SAMPLING_N, SAMPLING_TEMPERATURE,
};
use crate::error::{BackendError, Error, Result};
use crate::graph::{EntityName, KnowledgeGraph, Realization, RelationName, Triplet, DEFAULT_DEDUP_THRESHOLD};
use crate::prompt::{
    build_qa_prompt, build_relation_paraphrase_prompts, build_subject_paraphrase_prompt, object_query,
    parse_object_answer, parse_paraphrase_answer, parse_relations, ObjectAnswer,
};
use crate::reference::{
    default_dk_object_examples, default_pure_object_examples, default_relation_examples, InContextExample,
};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlConfig {
    pub max_depth: u32,
    pub decoding: Decoding,
    pub use_dk: bool,
    pub use_subject_paraphrasing: bool,
    pub use_relation_paraphrasing: bool,
    pub vote_threshold: usize,
    pub dedup_threshold: f64,
    /// Keep at most this many relations per entity.
    pub relation_cap: Option<usize>,
    /// Do not expand objects that look like numbers or dates.
    pub skip_literal_objects: bool,
    /// Count votes over distinct relation realizations instead of distinct
    /// (subject, relation) realization pairs.
    pub vote_on_relation_realizations: bool,
    pub max_in_flight: usize,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        Self {
            max_depth: 2,
            decoding: Decoding::Greedy,
            use_dk: true,
            use_subject_paraphrasing: true,
            use_relation_paraphrasing: true,
            vote_threshold: 2,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            relation_cap: None,
            skip_literal_objects: false,
            vote_on_relation_realizations: false,
            max_in_flight: 4,
        }
    }
}

impl CrawlConfig {
    /// Relation generation and pure object generation only, greedy decoding.
    pub fn pure_greedy() -> Self {
        Self {
            use_dk: false,
            use_subject_paraphrasing: false,
            use_relation_paraphrasing: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        if self.vote_threshold == 0 {
            return Err(Error::Config("vote_threshold must be >= 1".into()));
        }
        if !(self.dedup_threshold > 0.0 && self.dedup_threshold <= 1.0) {
            return Err(Error::Config("dedup_threshold must be in (0, 1]".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be >= 1".into()));
        }
        if let Decoding::Sampling { n, temperature } = self.decoding {
            if n == 0 || temperature.is_nan() || temperature < 0.0 {
                return Err(Error::Config("sampling needs n >= 1 and temperature >= 0".into()));
            }
        }
        Ok(())
    }
}

/// The three demonstration sets used by relation and object generation.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub relation: Vec<InContextExample>,
    pub pure_object: Vec<InContextExample>,
    pub dk_object: Vec<InContextExample>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            relation: default_relation_examples(),
            pure_object: default_pure_object_examples(),
            dk_object: default_dk_object_examples(),
        }
    }
}

/// A pooled object candidate for one relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub object: EntityName,
    pub provenance: Vec<Realization>,
    pub votes: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub relation: RelationName,
    pub realizations: Vec<String>,
    /// Realization pairs whose query succeeded.
    pub queried: Vec<Realization>,
    pub candidates: Vec<Candidate>,
}

impl RelationRecord {
    pub fn accepted(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.accepted)
    }
}

/// Everything one entity expansion produced; also the checkpoint record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub entity: EntityName,
    pub depth: u32,
    pub subject_realizations: Vec<String>,
    pub relations: Vec<RelationRecord>,
}

impl ExpansionRecord {
    /// Accepted facts, labeled with the canonical entity and relation.
    pub fn triplets(&self) -> Vec<Triplet> {
        self.relations
            .iter()
            .flat_map(|rel| {
                rel.accepted().map(move |c| {
                    Triplet::new(
                        self.entity.clone(),
                        rel.relation.clone(),
                        c.object.clone(),
                        self.depth,
                        c.provenance.clone(),
                    )
                })
            })
            .collect()
    }
}

/// Append-only JSON-lines log of finished expansions.
pub struct Checkpoint {
    path: PathBuf,
    file: File,
    records: HashMap<String, ExpansionRecord>,
}

impl Checkpoint {
    /// Starts a fresh checkpoint, discarding any previous contents.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            records: HashMap::new(),
        })
    }

    /// Opens an existing checkpoint so its expansions are replayed instead
    /// of re-queried. A truncated trailing record is ignored.
    pub fn resume(path: &Path) -> Result<Self> {
        let mut records = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ExpansionRecord>(&line) {
                    Ok(r) => {
                        records.insert(r.entity.normalized(), r);
                    }
                    Err(e) => log::warn!("{}:{}: ignoring bad checkpoint record: {e}", path.display(), i + 1),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn get(&self, entity: &EntityName) -> Option<&ExpansionRecord> {
        self.records.get(&entity.normalized())
    }

    fn append(&mut self, record: &ExpansionRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record).expect("record serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// A crawl that stopped early, with the graph assembled so far.
#[derive(Debug, thiserror::Error)]
#[error("crawl aborted after {} triplets: {source}", partial.len())]
pub struct CrawlError {
    pub partial: Box<KnowledgeGraph>,
    #[source]
    pub source: Error,
}

/// Matches objects that are plain numbers or dates.
pub fn is_literal(text: &str) -> bool {
    static PATTERNS: OnceLock<Vec<Regex>> = OnceLock::new();
    let patterns = PATTERNS.get_or_init(|| {
        let month = "(january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sep|sept|oct|nov|dec)";
        [
            r"^[+-]?\d[\d,. ]*%?$".to_owned(),
            r"^\d{1,4}[-/.]\d{1,2}[-/.]\d{1,4}$".to_owned(),
            format!(r"^(\d{{1,2}} )?{month}\.?( \d{{1,2}},?)? \d{{1,4}}$"),
            format!(r"^{month} \d{{1,4}}$"),
        ]
        .iter()
        .map(|p| Regex::new(p).expect("valid literal pattern"))
        .collect()
    });
    let n = normalize(text);
    patterns.iter().any(|re| re.is_match(&n))
}

pub struct Crawler<'a> {
    backend: &'a dyn CompletionBackend,
    prompts: PromptSet,
    config: CrawlConfig,
    pool: rayon::ThreadPool,
}

impl<'a> Crawler<'a> {
    pub fn new(backend: &'a dyn CompletionBackend, prompts: PromptSet, config: CrawlConfig) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_in_flight)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            backend,
            prompts,
            config,
            pool,
        })
    }

    pub fn config(&self) -> &CrawlConfig {
        &self.config
    }

    /// Runs `f` over `items` on the crawler's pool; results keep input order.
    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    /// The entity followed by up to three sampled aliases.
    pub fn paraphrase_subject(&self, entity: &EntityName) -> Vec<String> {
        let mut out = vec![entity.as_str().to_owned()];
        if !self.config.use_subject_paraphrasing {
            return out;
        }
        let req = CompletionRequest::new(
            build_subject_paraphrase_prompt(entity.as_str()),
            Decoding::Sampling {
                n: SAMPLING_N,
                temperature: SAMPLING_TEMPERATURE,
            },
            PARAPHRASE_MAX_TOKENS,
        );
        match self.backend.complete(&req) {
            Ok(resp) => {
                let texts = resp.texts.iter().map(String::as_str);
                push_paraphrases(&mut out, texts, entity.as_str());
            }
            Err(e) => log::warn!("subject paraphrasing failed for {entity:?}: {e}"),
        }
        out
    }

    /// Relation generation over each subject realization, pooled in order
    /// of first appearance.
    pub fn generate_relations(&self, realizations: &[String]) -> Result<Vec<RelationName>> {
        let results = self.par_map(realizations, |s| {
            let req = CompletionRequest::new(
                build_qa_prompt(&self.prompts.relation, s),
                self.config.decoding,
                LIST_MAX_TOKENS,
            );
            self.backend.complete(&req)
        });
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut last_err = None;
        let mut any_ok = false;
        for (s, result) in realizations.iter().zip(results) {
            match result {
                Ok(resp) => {
                    any_ok = true;
                    for text in &resp.texts {
                        for r in parse_relations(text) {
                            if seen.insert(r.normalized()) {
                                out.push(r);
                            }
                        }
                    }
                }
                Err(e) => {
                    log::warn!("relation generation failed for {s:?}: {e}");
                    last_err = Some(e);
                }
            }
        }
        if !any_ok {
            return Err(Error::AllFailed {
                step: "relation generation",
                entity: realizations.first().cloned().unwrap_or_default(),
                last: last_err.unwrap_or_else(|| BackendError::InvalidRequest("no realizations".into())),
            });
        }
        if let Some(cap) = self.config.relation_cap {
            out.truncate(cap);
        }
        Ok(out)
    }

    /// The relation followed by one paraphrase per instruction template.
    pub fn paraphrase_relation(&self, relation: &RelationName) -> Vec<String> {
        let mut out = vec![relation.as_str().to_owned()];
        if !self.config.use_relation_paraphrasing {
            return out;
        }
        let prompts = build_relation_paraphrase_prompts(relation.as_str());
        let results = self.par_map(&prompts, |p| {
            self.backend
                .complete(&CompletionRequest::new(p.as_str(), Decoding::Greedy, PARAPHRASE_MAX_TOKENS))
        });
        let mut texts = Vec::new();
        for result in results {
            match result {
                Ok(resp) => texts.extend(resp.texts),
                Err(e) => log::warn!("relation paraphrasing failed for {relation:?}: {e}"),
            }
        }
        push_paraphrases(&mut out, texts.iter().map(String::as_str), relation.as_str());
        out
    }

    fn object_request(&self, subject: &str, relation: &str) -> CompletionRequest {
        let examples = if self.config.use_dk {
            &self.prompts.dk_object
        } else {
            &self.prompts.pure_object
        };
        CompletionRequest::new(
            build_qa_prompt(examples, &object_query(subject, relation)),
            self.config.decoding,
            LIST_MAX_TOKENS,
        )
    }

    /// Object generation over every subject × relation realization, with voting.
    pub fn generate_objects(
        &self,
        entity: &EntityName,
        relation: &RelationName,
        subject_realizations: &[String],
        relation_realizations: &[String],
    ) -> Result<RelationRecord> {
        let pairs: Vec<Realization> = subject_realizations
            .iter()
            .flat_map(|s| relation_realizations.iter().map(move |r| Realization::new(s.as_str(), r.as_str())))
            .collect();
        let results = self.par_map(&pairs, |p| {
            self.backend.complete(&self.object_request(&p.subject, &p.relation))
        });
        let answers = pairs.into_iter().zip(results).collect::<Vec<_>>();
        self.pool_objects(entity, relation, relation_realizations, answers)
    }

    fn pool_objects(
        &self,
        entity: &EntityName,
        relation: &RelationName,
        relation_realizations: &[String],
        answers: Vec<(Realization, std::result::Result<crate::backend::CompletionResponse, BackendError>)>,
    ) -> Result<RelationRecord> {
        let canonical = Realization::new(entity.as_str(), relation.as_str());
        let mut queried = Vec::new();
        let mut last_err = None;
        let mut pools: Vec<Pool> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (pair, result) in answers {
            let resp = match result {
                Ok(resp) => resp,
                Err(e) => {
                    log::warn!("object generation failed for {pair:?}: {e}");
                    last_err = Some(e);
                    continue;
                }
            };
            // union over samples: one vote per realization pair
            let mut from_pair: Vec<EntityName> = Vec::new();
            for text in &resp.texts {
                if let ObjectAnswer::Objects(objs) = parse_object_answer(text) {
                    for o in objs {
                        if !from_pair.iter().any(|x| x.normalized() == o.normalized()) {
                            from_pair.push(o);
                        }
                    }
                }
            }
            for o in from_pair {
                let key = o.normalized();
                let idx = *index.entry(key).or_insert_with(|| {
                    pools.push(Pool::default());
                    pools.len() - 1
                });
                pools[idx].add(o, &pair, pair == canonical);
            }
            queried.push(pair);
        }
        if queried.is_empty() {
            return Err(Error::AllFailed {
                step: "object generation",
                entity: object_query(entity.as_str(), relation.as_str()),
                last: last_err.unwrap_or_else(|| BackendError::InvalidRequest("no realizations".into())),
            });
        }

        let relation_only = self.config.vote_on_relation_realizations;
        let available = if relation_only {
            distinct_relations(&queried).min(relation_realizations.len())
        } else {
            queried.len()
        };
        let bound = self.config.vote_threshold.min(available);
        let candidates = pools
            .into_iter()
            .map(|pool| {
                let count = if relation_only {
                    distinct_relations(&pool.provenance)
                } else {
                    pool.provenance.len()
                };
                Candidate {
                    object: pool.representative(),
                    votes: pool.provenance.len(),
                    provenance: pool.provenance,
                    accepted: count >= bound,
                }
            })
            .collect();
        Ok(RelationRecord {
            relation: relation.clone(),
            realizations: relation_realizations.to_vec(),
            queried,
            candidates,
        })
    }

    /// Runs the full pipeline for one entity.
    pub fn expand_entity(&self, entity: &EntityName, depth: u32) -> Result<ExpansionRecord> {
        let subject_realizations = self.paraphrase_subject(entity);
        let relations = self.generate_relations(&subject_realizations)?;
        let relation_realizations = self.par_map(&relations, |r| self.paraphrase_relation(r));

        // every object query of this expansion, ordered by
        // (subject realization, relation, relation realization)
        let mut jobs = Vec::new();
        for s in &subject_realizations {
            for (ri, reals) in relation_realizations.iter().enumerate() {
                for r in reals {
                    jobs.push((ri, Realization::new(s.as_str(), r.as_str())));
                }
            }
        }
        let results = self.par_map(&jobs, |(_, p)| {
            self.backend.complete(&self.object_request(&p.subject, &p.relation))
        });
        let mut per_relation: Vec<Vec<_>> = vec![Vec::new(); relations.len()];
        for ((ri, pair), result) in jobs.into_iter().zip(results) {
            per_relation[ri].push((pair, result));
        }

        let mut records = Vec::with_capacity(relations.len());
        for ((relation, reals), answers) in relations.iter().zip(&relation_realizations).zip(per_relation) {
            records.push(self.pool_objects(entity, relation, reals, answers)?);
        }
        Ok(ExpansionRecord {
            entity: entity.clone(),
            depth,
            subject_realizations,
            relations: records,
        })
    }

    /// Breadth-first crawl from `seed`, then global near-duplicate removal.
    pub fn crawl(&self, seed: &EntityName) -> std::result::Result<KnowledgeGraph, CrawlError> {
        self.crawl_with(seed, None, |_| {})
    }

    /// Like [`Crawler::crawl`], logging each expansion to `checkpoint` and
    /// reporting it to `on_expansion`.
    pub fn crawl_with(
        &self,
        seed: &EntityName,
        mut checkpoint: Option<&mut Checkpoint>,
        mut on_expansion: impl FnMut(&ExpansionRecord),
    ) -> std::result::Result<KnowledgeGraph, CrawlError> {
        let mut graph = KnowledgeGraph::new(seed.clone());
        let mut visited: HashSet<String> = HashSet::from([seed.normalized()]);
        let mut frontier = vec![seed.clone()];
        for depth in 1..=self.config.max_depth {
            let mut next = Vec::new();
            for entity in &frontier {
                let replayed = checkpoint
                    .as_deref()
                    .and_then(|c| c.get(entity))
                    .filter(|r| r.depth == depth)
                    .cloned();
                let record = match replayed {
                    Some(r) => r,
                    None => {
                        let fresh = self.expand_entity(entity, depth).and_then(|r| {
                            if let Some(c) = checkpoint.as_deref_mut() {
                                c.append(&r)?;
                            }
                            Ok(r)
                        });
                        match fresh {
                            Ok(r) => r,
                            Err(source) => {
                                graph.dedup(self.config.dedup_threshold);
                                return Err(CrawlError { partial: Box::new(graph), source });
                            }
                        }
                    }
                };
                on_expansion(&record);
                for t in record.triplets() {
                    if depth < self.config.max_depth
                        && !(self.config.skip_literal_objects && is_literal(t.object.as_str()))
                        && visited.insert(t.object.normalized())
                    {
                        next.push(t.object.clone());
                    }
                    graph.insert(t);
                }
            }
            frontier = next;
        }
        graph.dedup(self.config.dedup_threshold);
        Ok(graph)
    }
}

fn distinct_relations(pairs: &[Realization]) -> usize {
    pairs
        .iter()
        .map(|p| p.relation.as_str())
        .collect::<HashSet<_>>()
        .len()
}

/// Adds accepted paraphrases of `original` to `out`, skipping normalized duplicates.
fn push_paraphrases<'t>(out: &mut Vec<String>, texts: impl Iterator<Item = &'t str>, original: &str) {
    for text in texts {
        if let Some(p) = parse_paraphrase_answer(text, original) {
            let key = normalize(&p);
            if !out.iter().any(|x| normalize(x) == key) {
                out.push(p);
            }
        }
    }
}

/// Surface variants of one normalized object and the pairs that produced it.
#[derive(Default)]
struct Pool {
    provenance: Vec<Realization>,
    variants: Vec<(EntityName, usize)>,
    canonical: Option<EntityName>,
}

impl Pool {
    fn add(&mut self, object: EntityName, pair: &Realization, canonical: bool) {
        if !self.provenance.contains(pair) {
            self.provenance.push(pair.clone());
        }
        if canonical && self.canonical.is_none() {
            self.canonical = Some(object.clone());
        }
        match self.variants.iter_mut().find(|(v, _)| *v == object) {
            Some((_, n)) => *n += 1,
            None => self.variants.push((object, 1)),
        }
    }

    /// The canonical pair's variant, else the most frequent (earliest on ties).
    fn representative(&self) -> EntityName {
        if let Some(c) = &self.canonical {
            return c.clone();
        }
        let mut best = &self.variants[0];
        for v in &self.variants[1..] {
            if v.1 > best.1 {
                best = v;
            }
        }
        best.0.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Matcher, MockBackend};

    fn e(s: &str) -> EntityName {
        EntityName::new(s).unwrap()
    }

    fn r(s: &str) -> RelationName {
        RelationName::new(s).unwrap()
    }

    fn obj(subject: &str, relation: &str) -> Matcher {
        Matcher::Suffix(format!("\n\nQ: {subject} # {relation}\nA:"))
    }

    fn crawler<'a>(m: &'a MockBackend, config: CrawlConfig) -> Crawler<'a> {
        Crawler::new(m, PromptSet::default(), config).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(CrawlConfig::default().validate().is_ok());
        for bad in [
            CrawlConfig { vote_threshold: 0, ..Default::default() },
            CrawlConfig { dedup_threshold: 0.0, ..Default::default() },
            CrawlConfig { dedup_threshold: 1.5, ..Default::default() },
            CrawlConfig { max_depth: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn subject_paraphrases() {
        let m = MockBackend::new(true);
        m.on(Matcher::Exact("Alan Turing is also known as:".into()), " The father of computing")
            .unwrap();
        let c = crawler(&m, CrawlConfig::default());
        assert_eq!(
            c.paraphrase_subject(&e("Alan Turing")),
            vec!["Alan Turing", "The father of computing"]
        );
        let req = &m.calls()[0];
        assert_eq!((req.n_samples, req.temperature, req.max_tokens), (3, 0.8, 64));

        let off = crawler(&m, CrawlConfig { use_subject_paraphrasing: false, ..Default::default() });
        assert_eq!(off.paraphrase_subject(&e("Alan Turing")), vec!["Alan Turing"]);
        assert_eq!(m.call_count(), 1);
    }

    #[test]
    fn subject_paraphrase_failure_degrades() {
        let m = MockBackend::new(true);
        let c = crawler(&m, CrawlConfig::default());
        assert_eq!(c.paraphrase_subject(&e("X")), vec!["X"]);
    }

    #[test]
    fn relations_pool_across_realizations_and_samples() {
        let m = MockBackend::new(true);
        m.on(Matcher::Suffix("Q: Philippines\nA:".into()), " leader name # cctld # capital # calling code")
            .unwrap();
        m.on(Matcher::Suffix("Q: PH\nA:".into()), " capital # anthem").unwrap();
        let c = crawler(&m, CrawlConfig::default());
        let rels = c.generate_relations(&["Philippines".into(), "PH".into()]).unwrap();
        let names: Vec<&str> = rels.iter().map(|r| r.as_str()).collect();
        assert_eq!(names, vec!["leader name", "cctld", "capital", "calling code", "anthem"]);

        let m = MockBackend::new(true);
        m.register_fixture(
            Matcher::Suffix("Q: X\nA:".into()),
            vec![" a # b".into(), " b # c".into(), " d".into()],
        )
        .unwrap();
        let c = crawler(&m, CrawlConfig { decoding: Decoding::sampling(), ..Default::default() });
        let names: Vec<String> = c
            .generate_relations(&["X".into()])
            .unwrap()
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(names, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn relation_generation_all_failed() {
        let m = MockBackend::new(true);
        let c = crawler(&m, CrawlConfig::default());
        assert!(matches!(
            c.generate_relations(&["Nobody".into()]),
            Err(Error::AllFailed { .. })
        ));
    }

    #[test]
    fn relation_cap_truncates() {
        let m = MockBackend::new(true);
        m.on(Matcher::Suffix("Q: X\nA:".into()), " a # b # c").unwrap();
        let c = crawler(&m, CrawlConfig { relation_cap: Some(2), ..Default::default() });
        assert_eq!(c.generate_relations(&["X".into()]).unwrap().len(), 2);
    }

    #[test]
    fn relation_paraphrases() {
        let m = MockBackend::new(true);
        m.on(Matcher::Exact("'spouse' may be described as".into()), " husband or wife").unwrap();
        m.on(Matcher::Exact("'spouse' refers to".into()), " a marriage partner").unwrap();
        m.on(Matcher::Exact("please describe 'spouse' in a few words:".into()), " Husband or wife.")
            .unwrap();
        let c = crawler(&m, CrawlConfig::default());
        assert_eq!(
            c.paraphrase_relation(&r("spouse")),
            vec!["spouse", "husband or wife", "a marriage partner"]
        );
        let off = crawler(&m, CrawlConfig { use_relation_paraphrasing: false, ..Default::default() });
        assert_eq!(off.paraphrase_relation(&r("spouse")), vec!["spouse"]);
    }

    #[test]
    fn voting_over_four_realizations() {
        let m = MockBackend::new(true);
        m.on(obj("E", "r"), " A # B").unwrap();
        m.on(obj("E", "r2"), " A # C").unwrap();
        m.on(obj("E2", "r"), " Don't know").unwrap();
        m.on(obj("E2", "r2"), " D").unwrap();
        let c = crawler(&m, CrawlConfig::default());
        let rec = c
            .generate_objects(&e("E"), &r("r"), &["E".into(), "E2".into()], &["r".into(), "r2".into()])
            .unwrap();
        let accepted: Vec<&str> = rec.accepted().map(|c| c.object.as_str()).collect();
        assert_eq!(accepted, vec!["A"]);
        assert_eq!(rec.candidates.len(), 4);
        assert_eq!(rec.queried.len(), 4);
    }

    #[test]
    fn single_realization_degrades_threshold() {
        let m = MockBackend::new(true);
        m.on(obj("E", "r"), " A").unwrap();
        let c = crawler(&m, CrawlConfig::pure_greedy());
        let rec = c.generate_objects(&e("E"), &r("r"), &["E".into()], &["r".into()]).unwrap();
        assert_eq!(rec.accepted().count(), 1);
    }

    #[test]
    fn representative_prefers_canonical_then_frequency() {
        let m = MockBackend::new(true);
        m.on(obj("E", "r"), " sasha obama").unwrap();
        m.on(obj("E", "r2"), " Sasha Obama").unwrap();
        m.on(obj("E", "r3"), " Sasha Obama").unwrap();
        let c = crawler(&m, CrawlConfig::default());
        let reals = ["r".to_string(), "r2".into(), "r3".into()];
        let rec = c.generate_objects(&e("E"), &r("r"), &["E".into()], &reals).unwrap();
        assert_eq!(rec.candidates[0].object.as_str(), "sasha obama");
        assert_eq!(rec.candidates[0].votes, 3);

        let rec = c.generate_objects(&e("E"), &r("q"), &["E".into()], &reals[1..]).unwrap();
        assert_eq!(rec.candidates[0].object.as_str(), "Sasha Obama");
    }

    #[test]
    fn relation_only_voting() {
        // lenient: unscripted pairs answer with empty text, so all four succeed
        let m = MockBackend::new(false);
        m.on(obj("E", "r"), " A").unwrap();
        m.on(obj("E2", "r"), " A").unwrap();
        let config = CrawlConfig { vote_on_relation_realizations: true, ..Default::default() };
        let c = crawler(&m, config);
        let reals = ["r".to_string(), "r2".into()];
        let rec = c.generate_objects(&e("E"), &r("r"), &["E".into(), "E2".into()], &reals).unwrap();
        // two subject realizations but one relation realization: rejected
        assert_eq!(rec.accepted().count(), 0);
        // the pair-counting default accepts it
        let c = crawler(&m, CrawlConfig::default());
        let rec = c.generate_objects(&e("E"), &r("r"), &["E".into(), "E2".into()], &reals).unwrap();
        assert_eq!(rec.accepted().count(), 1);
    }

    #[test]
    fn failed_realizations_shrink_pool() {
        let m = MockBackend::new(true);
        m.on(obj("E", "r"), " A").unwrap();
        let c = crawler(&m, CrawlConfig::default());
        // the second pair is unregistered (strict): only one query succeeds
        let rec = c.generate_objects(&e("E"), &r("r"), &["E".into()], &["r".into(), "r2".into()]).unwrap();
        assert_eq!(rec.queried.len(), 1);
        assert_eq!(rec.accepted().count(), 1);

        let none = MockBackend::new(true);
        let c = crawler(&none, CrawlConfig::default());
        assert!(c.generate_objects(&e("E"), &r("r"), &["E".into()], &["r".into()]).is_err());
    }

    #[test]
    fn literal_detection() {
        for lit in ["1912", "23 June 1912", "June 23, 1912", "1954-06-07", "3.5", "1,000", "May 2001"] {
            assert!(is_literal(lit), "{lit}");
        }
        for name in ["Alan Turing", "June Carter", "Route 66", "May"] {
            assert!(!is_literal(name), "{name}");
        }
    }

    #[test]
    fn zero_relations_is_an_empty_expansion() {
        let m = MockBackend::new(false);
        let c = crawler(&m, CrawlConfig::default());
        let rec = c.expand_entity(&e("Nothing"), 1).unwrap();
        assert!(rec.relations.is_empty());
        assert!(rec.triplets().is_empty());
        assert_eq!(rec.subject_realizations, vec!["Nothing"]);
    }

    #[test]
    fn checkpoint_resume_replays_without_queries() {
        let m = MockBackend::new(false);
        m.on(Matcher::Suffix("Q: S\nA:".into()), " r").unwrap();
        m.on(obj("S", "r"), " O").unwrap();
        let config = CrawlConfig { max_depth: 1, ..CrawlConfig::pure_greedy() };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.jsonl");
        let g1 = {
            let mut ck = Checkpoint::create(&path).unwrap();
            crawler(&m, config.clone()).crawl_with(&e("S"), Some(&mut ck), |_| {}).unwrap()
        };
        let calls = m.call_count();
        let mut ck = Checkpoint::resume(&path).unwrap();
        assert_eq!(ck.len(), 1);
        let g2 = crawler(&m, config).crawl_with(&e("S"), Some(&mut ck), |_| {}).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(m.call_count(), calls);
    }

    #[test]
    fn abort_returns_partial_graph() {
        let m = MockBackend::new(true);
        m.on(Matcher::Suffix("Q: S\nA:".into()), " r").unwrap();
        m.on(obj("S", "r"), " O").unwrap();
        // expanding O at depth 2 fails: no fixture for its relation prompt
        let c = crawler(&m, CrawlConfig::pure_greedy());
        let err = c.crawl(&e("S")).unwrap_err();
        assert_eq!(err.partial.len(), 1);
        assert!(matches!(err.source, Error::AllFailed { .. }));
    }
}
