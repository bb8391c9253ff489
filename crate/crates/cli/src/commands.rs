use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use kgcrawl_core::backend::{load_mock_script, CachedBackend, CompletionBackend, HttpBackend, MockBackend};
use kgcrawl_core::crawl::{Checkpoint, CrawlError};
use kgcrawl_core::dk::{build_dk_examples, probe, DkProbeResult, ProbeVerdict};
use kgcrawl_core::eval::{
    evaluate_triplets, frequency_correlation, frequency_rows, EvaluationReport, FixtureCorpus,
    HttpSnippetProvider, SnippetProvider,
};
use kgcrawl_core::graph::{infer_seed, read_triplets, KnowledgeGraph};
use kgcrawl_core::reference::{load_fixed_examples, load_reference_kb, write_examples};
use kgcrawl_core::{Crawler, EntityName, PromptSet, RelationName};

use crate::config::{AppConfig, BackendKind};

pub const GRAPH_FILE: &str = "graph.jsonl";
pub const DOT_FILE: &str = "graph.dot";
pub const PARTIAL_GRAPH_FILE: &str = "graph.partial.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.jsonl";
pub const RUN_FILE: &str = "run.json";
pub const DK_FILE: &str = "dk_examples.txt";
pub const PROBE_FILE: &str = "probe_results.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// Builds the configured backend, wrapped in the response cache when one is set.
pub fn build_backend(config: &AppConfig) -> anyhow::Result<Box<dyn CompletionBackend>> {
    let inner: Box<dyn CompletionBackend> = match config.backend.kind {
        BackendKind::Mock => {
            let path = config
                .backend
                .mock_script
                .as_ref()
                .ok_or_else(|| anyhow!("the mock backend needs a mock script"))?;
            let fixtures = load_mock_script(path)?;
            Box::new(MockBackend::with_fixtures(config.backend.strict_mock, fixtures)?)
        }
        BackendKind::Http => Box::new(HttpBackend::from_env(config.backend.http.clone())?),
    };
    Ok(match &config.cache {
        Some(path) => Box::new(CachedBackend::open(inner, path)?),
        None => inner,
    })
}

pub fn load_prompts(config: &AppConfig) -> anyhow::Result<PromptSet> {
    let mut prompts = PromptSet::default();
    let p = &config.prompts;
    if let Some(path) = &p.relation {
        prompts.relation = load_fixed_examples(path)?;
    }
    if let Some(path) = &p.pure_object {
        prompts.pure_object = load_fixed_examples(path)?;
    }
    if let Some(path) = &p.dk_object {
        prompts.dk_object = load_fixed_examples(path)?;
    }
    for (name, set) in [
        ("relation", &prompts.relation),
        ("pure object", &prompts.pure_object),
        ("DK object", &prompts.dk_object),
    ] {
        if set.is_empty() {
            bail!("the {name} prompt has no examples");
        }
    }
    Ok(prompts)
}

fn create_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    seed: &'a str,
    triplets: usize,
    entities: usize,
    depth_counts: Vec<(u32, usize)>,
    config: &'a AppConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlOutputs {
    pub graph: PathBuf,
    pub dot: PathBuf,
    pub checkpoint: PathBuf,
    pub metadata: PathBuf,
}

/// Crawls from `seed` and writes the graph, its DOT rendering, the
/// checkpoint, and run metadata into the output directory.
pub fn cmd_crawl(seed: &str, config: &AppConfig, resume: bool, out: &mut dyn Write) -> anyhow::Result<CrawlOutputs> {
    config.validate()?;
    let seed = EntityName::new(seed)?;
    let dir = &config.out_dir;
    create_out_dir(dir)?;
    let backend = build_backend(config)?;
    let prompts = load_prompts(config)?;
    let crawler = Crawler::new(backend.as_ref(), prompts, config.crawl.clone())?;

    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let mut checkpoint = if resume {
        Checkpoint::resume(&checkpoint_path)?
    } else {
        Checkpoint::create(&checkpoint_path)?
    };
    let result = crawler.crawl_with(&seed, Some(&mut checkpoint), |rec| {
        let facts: usize = rec.relations.iter().map(|r| r.accepted().count()).sum();
        log::info!(
            "expanded {:?} at depth {}: {} relations, {} facts",
            rec.entity.as_str(),
            rec.depth,
            rec.relations.len(),
            facts
        );
    });
    let graph = match result {
        Ok(g) => g,
        Err(CrawlError { partial, source }) => {
            let path = dir.join(PARTIAL_GRAPH_FILE);
            write_file(&path, partial.to_jsonl())?;
            return Err(anyhow!(source)).with_context(|| {
                format!(
                    "crawl from {seed:?} failed; partial graph ({} triplets) saved to {}, rerun with --resume to continue",
                    partial.len(),
                    path.display()
                )
            });
        }
    };

    let outputs = CrawlOutputs {
        graph: dir.join(GRAPH_FILE),
        dot: dir.join(DOT_FILE),
        checkpoint: checkpoint_path,
        metadata: dir.join(RUN_FILE),
    };
    write_file(&outputs.graph, graph.to_jsonl())?;
    write_file(&outputs.dot, graph.to_dot())?;
    let meta = RunMetadata {
        command: "crawl",
        seed: seed.as_str(),
        triplets: graph.len(),
        entities: graph.entities().count(),
        depth_counts: graph.depth_counts(),
        config,
    };
    write_file(&outputs.metadata, serde_json::to_string_pretty(&meta)?)?;

    writeln!(out, "seed: {seed}")?;
    writeln!(out, "triplets: {}", graph.len())?;
    writeln!(out, "entities: {}", meta.entities)?;
    for (depth, n) in &meta.depth_counts {
        writeln!(out, "depth {depth}: {n} triplets")?;
    }
    writeln!(out, "graph written to {}", outputs.graph.display())?;
    Ok(outputs)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeCounts {
    pub correct: usize,
    pub wrong: usize,
    pub abstained: usize,
    pub errors: usize,
}

/// Probes reference pairs with pure object generation and writes a DK
/// demonstration file.
pub fn cmd_bootstrap_dk(config: &AppConfig, out: &mut dyn Write) -> anyhow::Result<PathBuf> {
    let k_dk = config.dk.k_dk;
    if k_dk == 0 || !k_dk.is_multiple_of(2) {
        bail!("k_dk must be a positive even number, got {k_dk}");
    }
    config.validate()?;
    let kb_path = config
        .reference_kb
        .as_ref()
        .ok_or_else(|| anyhow!("bootstrap-dk needs a reference KB (--reference-kb)"))?;
    let kb = load_reference_kb(kb_path, false)?;
    if !kb.report().malformed.is_empty() {
        log::warn!("{} malformed reference lines skipped", kb.report().malformed.len());
    }
    create_out_dir(&config.out_dir)?;
    let backend = build_backend(config)?;
    let prompts = load_prompts(config)?;

    let mut pairs: Vec<(EntityName, RelationName)> = kb
        .facts()
        .iter()
        .map(|f| (f.subject.clone(), f.relation.clone()))
        .collect();
    if let Some(limit) = config.dk.probe_limit {
        if limit < pairs.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(limit);
            idx.sort_unstable();
            pairs = idx.into_iter().map(|i| pairs[i].clone()).collect();
        }
    }

    let outcomes = probe(&kb, backend.as_ref(), &prompts.pure_object, &pairs, config.crawl.max_in_flight)?;
    let mut counts = ProbeCounts::default();
    let mut results: Vec<DkProbeResult> = Vec::new();
    for (pair, outcome) in pairs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                match r.verdict {
                    ProbeVerdict::Correct => counts.correct += 1,
                    ProbeVerdict::Wrong => counts.wrong += 1,
                    ProbeVerdict::Abstained => counts.abstained += 1,
                }
                results.push(r);
            }
            Err(e) => {
                log::warn!("probe {} # {} failed: {e}", pair.0, pair.1);
                counts.errors += 1;
            }
        }
    }
    let mut probe_log = Vec::new();
    for r in &results {
        serde_json::to_writer(&mut probe_log, r)?;
        probe_log.push(b'\n');
    }
    write_file(&config.out_dir.join(PROBE_FILE), probe_log)?;

    let examples = build_dk_examples(&results, k_dk, config.rng_seed).with_context(|| {
        format!(
            "probed {} pairs: {} correct, {} wrong, {} abstained, {} errors",
            pairs.len(),
            counts.correct,
            counts.wrong,
            counts.abstained,
            counts.errors
        )
    })?;
    let path = config.out_dir.join(DK_FILE);
    write_examples(&path, &examples)?;
    let dk = examples.iter().filter(|e| e.is_dont_know()).count();
    writeln!(
        out,
        "probed {} pairs: {} correct, {} wrong, {} abstained, {} errors",
        pairs.len(),
        counts.correct,
        counts.wrong,
        counts.abstained,
        counts.errors
    )?;
    writeln!(out, "wrote {} examples ({} \"Don't know\") to {}", examples.len(), dk, path.display())?;
    Ok(path)
}

/// Where evaluation snippets come from.
pub enum SnippetSource<'a> {
    Corpus { path: &'a Path, strict: bool },
    Endpoint(&'a str),
}

pub fn cmd_evaluate(
    graph_path: &Path,
    source: SnippetSource<'_>,
    seed: Option<&str>,
    report_path: &Path,
    out: &mut dyn Write,
) -> anyhow::Result<EvaluationReport> {
    let file = fs::File::open(graph_path).with_context(|| format!("opening graph {}", graph_path.display()))?;
    let triplets = read_triplets(BufReader::new(file), graph_path)?;
    let seed = match seed {
        Some(s) => Some(EntityName::new(s)?),
        None => infer_seed(&triplets),
    };
    let provider: Box<dyn SnippetProvider> = match source {
        SnippetSource::Corpus { path, strict } => Box::new(FixtureCorpus::load(path, strict)?),
        SnippetSource::Endpoint(url) => Box::new(HttpSnippetProvider::new(url)?),
    };
    let report = evaluate_triplets(seed.as_ref(), &triplets, provider.as_ref());
    if let Some(dir) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_out_dir(dir)?;
    }
    write_file(report_path, serde_json::to_string_pretty(&report)?)?;

    writeln!(out, "precision: {}", report.precision_display())?;
    writeln!(out, "facts_count: {}", report.facts_count)?;
    writeln!(
        out,
        "judged: {} verified, {} unverified, {} provider errors",
        report.overall.verified, report.overall.unverified, report.overall.provider_errors
    )?;
    for (depth, tally) in &report.by_depth {
        let p = tally
            .precision()
            .map_or_else(|| "n/a".to_owned(), |p| format!("{:.1}%", p * 100.0));
        writeln!(out, "depth {depth}: precision {p}, facts_count {}", tally.facts_count())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Dot,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "jsonl" => Ok(ExportFormat::Jsonl),
            other => bail!("unknown export format {other:?} (expected dot or jsonl)"),
        }
    }
}

pub fn cmd_export(graph_path: &Path, format: ExportFormat, seed: Option<&str>) -> anyhow::Result<String> {
    let seed = seed.map(EntityName::new).transpose()?;
    let graph: KnowledgeGraph = kgcrawl_core::graph::load_graph(graph_path, seed)?;
    Ok(match format {
        ExportFormat::Dot => graph.to_dot(),
        ExportFormat::Jsonl => graph.to_jsonl(),
    })
}

/// Correlates verified-fact counts across reports with reference-KB fact counts.
pub fn cmd_stats(
    report_paths: &[PathBuf],
    kb_path: &Path,
    csv_path: Option<&Path>,
    out: &mut dyn Write,
) -> anyhow::Result<Option<f64>> {
    let kb = load_reference_kb(kb_path, false)?;
    let mut reports = Vec::with_capacity(report_paths.len());
    for p in report_paths {
        let text = fs::read_to_string(p).with_context(|| format!("reading report {}", p.display()))?;
        let report: EvaluationReport =
            serde_json::from_str(&text).with_context(|| format!("parsing report {}", p.display()))?;
        reports.push(report);
    }
    let rows = frequency_rows(&reports, &kb);
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    for row in &rows {
        writeln!(out, "{}\t{}\t{}", row.seed, row.facts_count, row.reference_count)?;
    }
    let r = frequency_correlation(&rows).ok();
    match r {
        Some(r) => writeln!(out, "pearson: {r:.4}")?,
        None => writeln!(out, "pearson: n/a")?,
    }
    Ok(r)
}
