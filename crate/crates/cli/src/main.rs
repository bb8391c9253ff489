use std::io::{self, Write};

use anyhow::{anyhow, Context};
use clap::Parser;

use kgcrawl_cli::args::{Cli, Command};
use kgcrawl_cli::commands::{self, SnippetSource, REPORT_FILE};
use kgcrawl_cli::config::AppConfig;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Crawl(a) => {
            a.apply(&mut config);
            commands::cmd_crawl(&a.seed, &config, a.resume, &mut out)?;
        }
        Command::BootstrapDk(a) => {
            a.apply(&mut config);
            commands::cmd_bootstrap_dk(&config, &mut out)?;
        }
        Command::Evaluate(a) => {
            if let Some(d) = &a.out_dir {
                config.out_dir = d.clone();
            }
            let report = a.out.clone().unwrap_or_else(|| config.out_dir.join(REPORT_FILE));
            let source = match (&a.corpus, &a.search_endpoint) {
                (Some(p), _) => SnippetSource::Corpus { path: p, strict: !a.lenient },
                (None, Some(u)) => SnippetSource::Endpoint(u),
                (None, None) => unreachable!("clap requires one source"),
            };
            commands::cmd_evaluate(&a.graph, source, a.seed.as_deref(), &report, &mut out)?;
        }
        Command::Export(a) => {
            let text = commands::cmd_export(&a.graph, a.format, a.seed.as_deref())?;
            match &a.out {
                Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Stats(a) => {
            let kb = a
                .reference_kb
                .or(config.reference_kb)
                .ok_or_else(|| anyhow!("stats needs a reference KB (--reference-kb)"))?;
            commands::cmd_stats(&a.reports, &kb, a.csv.as_deref(), &mut out)?;
        }
    }
    Ok(())
}
