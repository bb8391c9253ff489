//! Run configuration: one TOML document, overridable by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use kgcrawl_core::backend::HttpConfig;
use kgcrawl_core::CrawlConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub http: HttpConfig,
    /// JSON-lines mock script, required for the mock backend.
    pub mock_script: Option<PathBuf>,
    /// Fail on prompts the mock script does not cover.
    pub strict_mock: bool,
}

/// Demonstration files; unset entries use the shipped defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptPaths {
    pub relation: Option<PathBuf>,
    pub pure_object: Option<PathBuf>,
    pub dk_object: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DkConfig {
    pub k_dk: usize,
    /// Probe at most this many reference pairs (sampled with `rng_seed`).
    pub probe_limit: Option<usize>,
}

impl Default for DkConfig {
    fn default() -> Self {
        Self {
            k_dk: kgcrawl_core::dk::DEFAULT_DK_EXAMPLES,
            probe_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub backend: BackendConfig,
    pub prompts: PromptPaths,
    pub reference_kb: Option<PathBuf>,
    pub crawl: CrawlConfig,
    pub dk: DkConfig,
    pub cache: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub rng_seed: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            prompts: PromptPaths::default(),
            reference_kb: None,
            crawl: CrawlConfig::default(),
            dk: DkConfig::default(),
            cache: None,
            out_dir: PathBuf::from("out"),
            rng_seed: 0,
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every input path exists and the crawl settings are valid.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.crawl.validate()?;
        let inputs = [
            ("backend.mock_script", self.backend.mock_script.as_ref()),
            ("prompts.relation", self.prompts.relation.as_ref()),
            ("prompts.pure_object", self.prompts.pure_object.as_ref()),
            ("prompts.dk_object", self.prompts.dk_object.as_ref()),
            ("reference_kb", self.reference_kb.as_ref()),
        ];
        for (field, path) in inputs {
            if let Some(p) = path {
                if !p.exists() {
                    bail!("{field}: no such file: {}", p.display());
                }
            }
        }
        if self.backend.kind == BackendKind::Mock && self.backend.mock_script.is_none() {
            bail!("the mock backend needs backend.mock_script (--mock-script)");
        }
        Ok(())
    }
}
