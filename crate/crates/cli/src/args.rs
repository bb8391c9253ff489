use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kgcrawl_core::backend::Decoding;

use crate::commands::ExportFormat;
use crate::config::{AppConfig, BackendKind};

#[derive(Debug, Parser)]
#[command(name = "kgcrawl", version, about = "Crawl a knowledge graph out of a language model")]
pub struct Cli {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crawl a graph starting from a seed entity.
    Crawl(CrawlArgs),
    /// Mine "Don't know" demonstrations from a reference KB.
    BootstrapDk(BootstrapArgs),
    /// Score a crawled graph against text snippets.
    Evaluate(EvaluateArgs),
    /// Re-emit a graph as DOT or JSON lines.
    Export(ExportArgs),
    /// Correlate verified facts per seed with reference-KB counts.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecodingArg {
    Greedy,
    Sampling,
}

impl DecodingArg {
    pub fn decoding(self) -> Decoding {
        match self {
            DecodingArg::Greedy => Decoding::Greedy,
            DecodingArg::Sampling => Decoding::sampling(),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// JSON-lines fixture script for the mock backend.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Fail on prompts the mock script does not cover.
    #[arg(long)]
    pub strict_mock: bool,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Append-only response cache (JSON lines).
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub relation_examples: Option<PathBuf>,
    #[arg(long)]
    pub pure_object_examples: Option<PathBuf>,
    #[arg(long)]
    pub dk_object_examples: Option<PathBuf>,
    #[arg(long)]
    pub reference_kb: Option<PathBuf>,
    #[arg(long)]
    pub rng_seed: Option<u64>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

impl CommonArgs {
    pub fn apply(&self, c: &mut AppConfig) {
        if let Some(b) = self.backend {
            c.backend.kind = b;
        }
        if let Some(p) = &self.mock_script {
            c.backend.mock_script = Some(p.clone());
        }
        if self.strict_mock {
            c.backend.strict_mock = true;
        }
        if let Some(e) = &self.endpoint {
            c.backend.http.endpoint = e.clone();
        }
        if let Some(m) = &self.model {
            c.backend.http.model = m.clone();
        }
        if let Some(p) = &self.cache {
            c.cache = Some(p.clone());
        }
        if let Some(p) = &self.out_dir {
            c.out_dir = p.clone();
        }
        if let Some(p) = &self.relation_examples {
            c.prompts.relation = Some(p.clone());
        }
        if let Some(p) = &self.pure_object_examples {
            c.prompts.pure_object = Some(p.clone());
        }
        if let Some(p) = &self.dk_object_examples {
            c.prompts.dk_object = Some(p.clone());
        }
        if let Some(p) = &self.reference_kb {
            c.reference_kb = Some(p.clone());
        }
        if let Some(s) = self.rng_seed {
            c.rng_seed = s;
        }
        if let Some(n) = self.max_in_flight {
            c.crawl.max_in_flight = n;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CrawlArgs {
    /// Entity to start from.
    #[arg(long)]
    pub seed: String,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long, value_enum)]
    pub decoding: Option<DecodingArg>,
    /// Use the pure object prompt instead of the "Don't know" prompt.
    #[arg(long)]
    pub no_dk: bool,
    /// Disable subject paraphrasing.
    #[arg(long)]
    pub no_sp: bool,
    /// Disable relation paraphrasing.
    #[arg(long)]
    pub no_rp: bool,
    #[arg(long)]
    pub vote_threshold: Option<usize>,
    #[arg(long)]
    pub dedup_threshold: Option<f64>,
    /// Keep at most this many relations per entity.
    #[arg(long)]
    pub relation_cap: Option<usize>,
    /// Do not expand numeric or date objects.
    #[arg(long)]
    pub skip_literals: bool,
    /// Count votes over distinct relation realizations only.
    #[arg(long)]
    pub relation_votes_only: bool,
    /// Replay expansions from an existing checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl CrawlArgs {
    pub fn apply(&self, c: &mut AppConfig) {
        self.common.apply(c);
        let k = &mut c.crawl;
        if let Some(d) = self.depth {
            k.max_depth = d;
        }
        if let Some(d) = self.decoding {
            k.decoding = d.decoding();
        }
        if self.no_dk {
            k.use_dk = false;
        }
        if self.no_sp {
            k.use_subject_paraphrasing = false;
        }
        if self.no_rp {
            k.use_relation_paraphrasing = false;
        }
        if let Some(v) = self.vote_threshold {
            k.vote_threshold = v;
        }
        if let Some(t) = self.dedup_threshold {
            k.dedup_threshold = t;
        }
        if let Some(n) = self.relation_cap {
            k.relation_cap = Some(n);
        }
        if self.skip_literals {
            k.skip_literal_objects = true;
        }
        if self.relation_votes_only {
            k.vote_on_relation_realizations = true;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    /// Number of demonstrations to produce (even).
    #[arg(long)]
    pub k_dk: Option<usize>,
    /// Probe at most this many reference pairs.
    #[arg(long)]
    pub probe_limit: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl BootstrapArgs {
    pub fn apply(&self, c: &mut AppConfig) {
        self.common.apply(c);
        if let Some(k) = self.k_dk {
            c.dk.k_dk = k;
        }
        if let Some(n) = self.probe_limit {
            c.dk.probe_limit = Some(n);
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// JSON-lines corpus of {query, snippet} records.
    #[arg(long, conflicts_with = "search_endpoint", required_unless_present = "search_endpoint")]
    pub corpus: Option<PathBuf>,
    /// Search endpoint queried with `?q=`.
    #[arg(long)]
    pub search_endpoint: Option<String>,
    /// Treat corpus misses as empty snippets instead of errors.
    #[arg(long)]
    pub lenient: bool,
    /// Seed entity; inferred from the graph when absent.
    #[arg(long)]
    pub seed: Option<String>,
    /// Report path (default: <out-dir>/report.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "dot")]
    pub format: ExportFormat,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Evaluation reports, one per seed.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub reference_kb: Option<PathBuf>,
    /// Write per-seed rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
