//! Automatic precision estimation against search snippets, and the
//! fact-count correlation analysis.
//!
//! A triplet counts as verified when its object appears, as a contiguous
//! token run, within the first 40 words of the snippet returned for
//! `"subject relation"`. HTML tags and URLs are removed before counting
//! words.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityName, KnowledgeGraph, Triplet};
use crate::reference::ReferenceKb;
use crate::text::{contains_sequence, match_tokens, normalize};

pub const DEFAULT_WINDOW_WORDS: usize = 40;

/// Source of raw search-result text for a query.
pub trait SnippetProvider: Send + Sync {
    fn snippet(&self, query: &str) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub query: String,
    pub snippet: String,
}

/// Offline snippets keyed by query. Lookup tries the exact query, then its
/// normalized form.
#[derive(Debug, Clone, Default)]
pub struct FixtureCorpus {
    exact: HashMap<String, String>,
    normalized: HashMap<String, String>,
    strict: bool,
}

impl FixtureCorpus {
    /// In strict mode an unknown query is an error; otherwise it yields an
    /// empty snippet.
    pub fn new(records: impl IntoIterator<Item = CorpusRecord>, strict: bool) -> Self {
        let mut corpus = Self {
            strict,
            ..Self::default()
        };
        for r in records {
            corpus
                .normalized
                .entry(normalize(&r.query))
                .or_insert_with(|| r.snippet.clone());
            corpus.exact.insert(r.query, r.snippet);
        }
        corpus
    }

    /// Reads a JSON-lines corpus of `{"query": ..., "snippet": ...}` records.
    pub fn load(path: &Path, strict: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Self::new(records, strict))
    }

    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }
}

impl SnippetProvider for FixtureCorpus {
    fn snippet(&self, query: &str) -> Result<String> {
        if let Some(s) = self.exact.get(query).or_else(|| self.normalized.get(&normalize(query))) {
            return Ok(s.clone());
        }
        if self.strict {
            Err(Error::Provider(format!("no snippet for query {query:?}")))
        } else {
            Ok(String::new())
        }
    }
}

/// Queries a web-search endpoint with `GET {endpoint}?q={query}` and uses
/// the response body as the snippet.
pub struct HttpSnippetProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpSnippetProvider {
    pub fn new(endpoint: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            client,
        })
    }
}

impl SnippetProvider for HttpSnippetProvider {
    fn snippet(&self, query: &str) -> Result<String> {
        let url = reqwest::Url::parse_with_params(&self.endpoint, &[("q", query)])
            .map_err(|e| Error::Provider(format!("{}: {e}", self.endpoint)))?;
        let resp = self
            .client
            .get(url)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| Error::Provider(e.to_string()))?;
        resp.text().map_err(|e| Error::Provider(e.to_string()))
    }
}

fn tag_pattern() -> &'static Regex {
    static TAG: OnceLock<Regex> = OnceLock::new();
    TAG.get_or_init(|| Regex::new(r"<[^<>]*>").expect("valid tag pattern"))
}

fn is_url(token: &str) -> bool {
    let t = token
        .trim_start_matches(['(', '[', '"', '\''])
        .to_ascii_lowercase();
    t.contains("://") || t.starts_with("www.")
}

/// The first `n_words` words of `raw` once HTML tags and URLs are removed.
pub fn extract_window(raw: &str, n_words: usize) -> String {
    let stripped = tag_pattern().replace_all(raw, " ");
    stripped
        .split_whitespace()
        .filter(|w| !is_url(w))
        .take(n_words)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Verified,
    Unverified,
    ProviderError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub triplet: Triplet,
    pub status: VerdictStatus,
    pub matched_window: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// The search query for a triplet: subject and relation separated by a space.
pub fn verification_query(t: &Triplet) -> String {
    format!("{} {}", t.subject, t.relation)
}

/// True when the object's tokens occur contiguously in the window.
pub fn object_in_window(object: &str, window: &str) -> bool {
    contains_sequence(&match_tokens(window), &match_tokens(object))
}

pub fn verify_fact_with_window(t: &Triplet, provider: &dyn SnippetProvider, n_words: usize) -> Verdict {
    match provider.snippet(&verification_query(t)) {
        Ok(raw) => {
            let window = extract_window(&raw, n_words);
            let status = if object_in_window(t.object.as_str(), &window) {
                VerdictStatus::Verified
            } else {
                VerdictStatus::Unverified
            };
            Verdict {
                triplet: t.clone(),
                status,
                matched_window: window,
                error: None,
            }
        }
        Err(e) => Verdict {
            triplet: t.clone(),
            status: VerdictStatus::ProviderError,
            matched_window: String::new(),
            error: Some(e.to_string()),
        },
    }
}

pub fn verify_fact(t: &Triplet, provider: &dyn SnippetProvider) -> Verdict {
    verify_fact_with_window(t, provider, DEFAULT_WINDOW_WORDS)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub verified: usize,
    pub unverified: usize,
    pub provider_errors: usize,
}

impl Tally {
    fn add(&mut self, status: VerdictStatus) {
        match status {
            VerdictStatus::Verified => self.verified += 1,
            VerdictStatus::Unverified => self.unverified += 1,
            VerdictStatus::ProviderError => self.provider_errors += 1,
        }
    }

    /// Verified over judged triplets; `None` when nothing was judged.
    pub fn precision(&self) -> Option<f64> {
        let judged = self.verified + self.unverified;
        (judged > 0).then(|| self.verified as f64 / judged as f64)
    }

    /// The number of verified facts.
    pub fn facts_count(&self) -> usize {
        self.verified
    }

    pub fn total(&self) -> usize {
        self.verified + self.unverified + self.provider_errors
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: Option<String>,
    pub verdicts: Vec<Verdict>,
    pub precision: Option<f64>,
    pub facts_count: usize,
    pub overall: Tally,
    pub by_depth: BTreeMap<u32, Tally>,
}

impl EvaluationReport {
    pub fn provider_error_fraction(&self) -> f64 {
        match self.overall.total() {
            0 => 0.0,
            n => self.overall.provider_errors as f64 / n as f64,
        }
    }

    /// Precision for display: a percentage, or `n/a` when undefined.
    pub fn precision_display(&self) -> String {
        match self.precision {
            Some(p) => format!("{:.1}%", p * 100.0),
            None => "n/a".to_owned(),
        }
    }
}

/// Verifies triplets concurrently; verdicts keep the input order.
pub fn evaluate_triplets(
    seed: Option<&EntityName>,
    triplets: &[Triplet],
    provider: &dyn SnippetProvider,
) -> EvaluationReport {
    use rayon::prelude::*;
    let verdicts: Vec<Verdict> = triplets.par_iter().map(|t| verify_fact(t, provider)).collect();
    let mut overall = Tally::default();
    let mut by_depth: BTreeMap<u32, Tally> = BTreeMap::new();
    for v in &verdicts {
        overall.add(v.status);
        by_depth.entry(v.triplet.depth).or_default().add(v.status);
    }
    EvaluationReport {
        seed: seed.map(|s| s.as_str().to_owned()),
        precision: overall.precision(),
        facts_count: overall.facts_count(),
        verdicts,
        overall,
        by_depth,
    }
}

pub fn evaluate_graph(graph: &KnowledgeGraph, provider: &dyn SnippetProvider) -> EvaluationReport {
    evaluate_triplets(Some(graph.seed()), graph.triplets(), provider)
}

/// Pearson product-moment correlation, computed from mean-centered sums.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Degenerate("correlation inputs differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("correlation needs at least two pairs"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation undefined for zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One row of the fact-count versus reference-count analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub seed: String,
    pub facts_count: usize,
    pub reference_count: usize,
}

pub fn frequency_rows(reports: &[EvaluationReport], kb: &ReferenceKb) -> Vec<FrequencyRow> {
    reports
        .iter()
        .filter_map(|r| {
            let seed = r.seed.clone()?;
            Some(FrequencyRow {
                reference_count: kb.fact_count(&seed),
                facts_count: r.facts_count,
                seed,
            })
        })
        .collect()
}

pub fn frequency_correlation(rows: &[FrequencyRow]) -> Result<f64> {
    let xs: Vec<f64> = rows.iter().map(|r| r.facts_count as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.reference_count as f64).collect();
    pearson_correlation(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Realization, RelationName};

    fn t(s: &str, r: &str, o: &str, depth: u32) -> Triplet {
        Triplet::new(
            EntityName::new(s).unwrap(),
            RelationName::new(r).unwrap(),
            EntityName::new(o).unwrap(),
            depth,
            vec![Realization::new(s, r)],
        )
    }

    fn corpus(pairs: &[(&str, &str)], strict: bool) -> FixtureCorpus {
        FixtureCorpus::new(
            pairs.iter().map(|(q, s)| CorpusRecord {
                query: q.to_string(),
                snippet: s.to_string(),
            }),
            strict,
        )
    }

    #[test]
    fn window_examples() {
        assert_eq!(
            extract_window("<b>Michelle</b> Obama https://x.y is", 40),
            "Michelle Obama is"
        );
        let fifty: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let w = extract_window(&fifty.join(" "), 40);
        assert_eq!(w.split(' ').count(), 40);
        assert!(w.ends_with("w39"));
        assert_eq!(extract_window("", 40), "");
        assert_eq!(
            extract_window("<a href=\"https://a.b/c d\">link</a> www.example.com text", 40),
            "link text"
        );
    }

    #[test]
    fn verification() {
        let c = corpus(
            &[
                ("Barack Obama spouse", "Obama married <i>Michelle Obama</i> in 1992."),
                ("Marble Arch country", "Marble Arch is a monument in London, England."),
            ],
            true,
        );
        assert_eq!(
            verify_fact(&t("Barack Obama", "spouse", "Michelle Obama", 1), &c).status,
            VerdictStatus::Verified
        );
        assert_eq!(
            verify_fact(&t("Marble Arch", "country", "United Kingdom", 1), &c).status,
            VerdictStatus::Unverified
        );
        assert_eq!(
            verify_fact(&t("Marble Arch", "country", "england", 1), &c).status,
            VerdictStatus::Verified
        );
        let missing = verify_fact(&t("Nobody", "r", "x", 1), &c);
        assert_eq!(missing.status, VerdictStatus::ProviderError);
        assert!(missing.error.unwrap().contains("Nobody r"));
    }

    #[test]
    fn partial_words_do_not_match() {
        assert!(!object_in_window("art", "Stuart Little"));
        assert!(object_in_window("NBA", "plays in the NBA."));
        assert!(!object_in_window("National Basketball Association (NBA)", "the National Basketball Association"));
    }

    #[test]
    fn aggregates() {
        let c = corpus(&[("A r", "x y"), ("B r", "nothing")], true);
        let triplets = vec![t("A", "r", "x", 1), t("B", "r", "x", 2), t("C", "r", "x", 2)];
        let report = evaluate_triplets(None, &triplets, &c);
        assert_eq!(report.precision, Some(0.5));
        assert_eq!(report.facts_count, 1);
        assert_eq!(report.overall.provider_errors, 1);
        assert_eq!(report.by_depth[&2].unverified, 1);
        assert!((report.provider_error_fraction() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_precision_is_undefined() {
        let g = KnowledgeGraph::new(EntityName::new("S").unwrap());
        let report = evaluate_graph(&g, &corpus(&[], true));
        assert_eq!(report.precision, None);
        assert_eq!(report.facts_count, 0);
        assert_eq!(report.precision_display(), "n/a");
        assert_eq!(report.seed.as_deref(), Some("S"));
    }

    #[test]
    fn lenient_corpus_yields_unverified() {
        let c = corpus(&[], false);
        assert_eq!(verify_fact(&t("A", "r", "x", 1), &c).status, VerdictStatus::Unverified);
        let c = corpus(&[("a  R", "x")], true);
        assert_eq!(verify_fact(&t("A", "r", "x", 1), &c).status, VerdictStatus::Verified);
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson_correlation(&[1., 2., 3.], &[2., 4., 6.]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_correlation(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson_correlation(&[1., 1., 1.], &[1., 2., 3.]).is_err());
        assert!(pearson_correlation(&[1.], &[1.]).is_err());
        assert!(pearson_correlation(&[1., 2.], &[1.]).is_err());
    }

    #[test]
    fn frequency_rows_use_reference_counts() {
        let kb = ReferenceKb::from_reader(
            "A\tr\tx\nA\tr\ty\nA\tq\tz\nB\tr\tx\n".as_bytes(),
            Path::new("kb"),
            true,
        )
        .unwrap();
        let report = |seed: &str, n| EvaluationReport {
            seed: Some(seed.into()),
            verdicts: vec![],
            precision: None,
            facts_count: n,
            overall: Tally::default(),
            by_depth: BTreeMap::new(),
        };
        let rows = frequency_rows(&[report("A", 10), report("B", 2)], &kb);
        assert_eq!(rows[0].reference_count, 3);
        assert_eq!(rows[1].reference_count, 1);
        assert!((frequency_correlation(&rows).unwrap() - 1.0).abs() < 1e-12);
    }
}
