use std::path::{Path, PathBuf};
use std::process::Command;

use kgcrawl_cli::commands::{self, ExportFormat, SnippetSource};
use kgcrawl_cli::config::{AppConfig, BackendKind};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn toy(out_dir: &Path) -> AppConfig {
    let mut c = AppConfig::default();
    c.backend.kind = BackendKind::Mock;
    c.backend.mock_script = Some(fixtures().join("toy/mock.jsonl"));
    c.out_dir = out_dir.to_path_buf();
    c
}

fn dk_config(out_dir: &Path) -> AppConfig {
    let mut c = AppConfig::default();
    c.backend.kind = BackendKind::Mock;
    c.backend.mock_script = Some(fixtures().join("dk/mock.jsonl"));
    c.reference_kb = Some(fixtures().join("dk/kb.tsv"));
    c.out_dir = out_dir.to_path_buf();
    c
}

#[test]
fn crawl_writes_outputs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    let paths = commands::cmd_crawl("Zorbia", &toy(dir.path()), false, &mut out).unwrap();
    let summary = String::from_utf8(out).unwrap();
    assert!(summary.contains("triplets: 12"), "{summary}");
    assert!(summary.contains("depth 1: 5 triplets"));
    assert!(summary.contains("depth 2: 7 triplets"));
    assert!(paths.checkpoint.exists());

    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths.metadata).unwrap()).unwrap();
    assert_eq!(run["seed"], "Zorbia");
    assert_eq!(run["config"]["crawl"]["max_depth"], 2);
    assert_eq!(run["config"]["backend"]["kind"], "mock");
}

#[test]
fn depth_one_is_a_prefix_of_depth_two() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut one = toy(a.path());
    one.crawl.max_depth = 1;
    commands::cmd_crawl("Zorbia", &one, false, &mut Vec::new()).unwrap();
    commands::cmd_crawl("Zorbia", &toy(b.path()), false, &mut Vec::new()).unwrap();
    let shallow = std::fs::read_to_string(a.path().join(commands::GRAPH_FILE)).unwrap();
    let deep = std::fs::read_to_string(b.path().join(commands::GRAPH_FILE)).unwrap();
    assert_eq!(shallow.lines().count(), 5);
    assert!(deep.starts_with(&shallow));
}

#[test]
fn export_is_deterministic_and_round_trips() {
    let golden = fixtures().join("toy/golden_graph.jsonl");
    let jsonl = commands::cmd_export(&golden, ExportFormat::Jsonl, None).unwrap();
    assert_eq!(jsonl, std::fs::read_to_string(&golden).unwrap());
    let dot = commands::cmd_export(&golden, ExportFormat::Dot, None).unwrap();
    assert_eq!(dot, std::fs::read_to_string(fixtures().join("toy/golden_graph.dot")).unwrap());
    assert_eq!(dot, commands::cmd_export(&golden, ExportFormat::Dot, Some("Zorbia")).unwrap());
}

#[test]
fn bootstrap_rejects_odd_k() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = dk_config(dir.path());
    c.dk.k_dk = 7;
    let err = commands::cmd_bootstrap_dk(&c, &mut Vec::new()).unwrap_err();
    assert!(err.to_string().contains("even"), "{err}");
}

#[test]
fn bootstrap_reports_counts_when_short() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = dk_config(dir.path());
    c.dk.k_dk = 12;
    let err = format!("{:#}", commands::cmd_bootstrap_dk(&c, &mut Vec::new()).unwrap_err());
    assert!(err.contains("15 correct, 5 wrong, 0 abstained, 0 errors"), "{err}");
    assert!(err.contains("need 6, have 5"), "{err}");
}

#[test]
fn bootstrap_probe_limit_samples_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = dk_config(dir.path());
    c.dk.probe_limit = Some(12);
    c.dk.k_dk = 2;
    let mut out = Vec::new();
    commands::cmd_bootstrap_dk(&c, &mut out).unwrap();
    let probes = std::fs::read_to_string(dir.path().join(commands::PROBE_FILE)).unwrap();
    assert_eq!(probes.lines().count(), 12);
}

#[test]
fn strict_corpus_flags_missing_queries() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    std::fs::write(&corpus, "{\"query\":\"Zorbia capital\",\"snippet\":\"Vell is the capital of Zorbia.\"}\n").unwrap();
    let graph = fixtures().join("toy/golden_graph.jsonl");
    let report_path = dir.path().join("r.json");

    let strict = commands::cmd_evaluate(&graph, SnippetSource::Corpus { path: &corpus, strict: true }, None, &report_path, &mut Vec::new())
        .unwrap();
    assert_eq!(strict.overall.verified, 1);
    assert_eq!(strict.overall.provider_errors, 11);
    assert_eq!(strict.precision, Some(1.0));

    let mut out = Vec::new();
    let lenient = commands::cmd_evaluate(&graph, SnippetSource::Corpus { path: &corpus, strict: false }, None, &report_path, &mut out)
        .unwrap();
    assert_eq!(lenient.overall.unverified, 11);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("facts_count: 1"), "{text}");
    assert_eq!(lenient.seed.as_deref(), Some("Zorbia"));
}

#[test]
fn stats_writes_csv_and_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.tsv");
    std::fs::write(&kb, "A\tr1\tx\nA\tr2\ty\nA\tr3\tz\nB\tr1\tx\nC\tr1\tx\nC\tr2\ty\n").unwrap();
    let mut reports = Vec::new();
    for (seed, verified) in [("A", 6), ("B", 2), ("C", 4)] {
        let graph = dir.path().join(format!("{seed}.jsonl"));
        let corpus = dir.path().join(format!("{seed}.corpus.jsonl"));
        let mut g = String::new();
        let mut c = String::new();
        for i in 0..verified {
            g.push_str(&format!(
                "{{\"subject\":\"{seed}\",\"relation\":\"r{i}\",\"object\":\"o{i}\",\"depth\":1,\"votes\":1,\"provenance\":[{{\"subject\":\"{seed}\",\"relation\":\"r{i}\"}}]}}\n"
            ));
            c.push_str(&format!("{{\"query\":\"{seed} r{i}\",\"snippet\":\"it is o{i}\"}}\n"));
        }
        std::fs::write(&graph, g).unwrap();
        std::fs::write(&corpus, c).unwrap();
        let report = dir.path().join(format!("{seed}.report.json"));
        commands::cmd_evaluate(&graph, SnippetSource::Corpus { path: &corpus, strict: true }, None, &report, &mut Vec::new())
            .unwrap();
        reports.push(report);
    }
    let csv = dir.path().join("rows.csv");
    let r = commands::cmd_stats(&reports, &kb, Some(&csv), &mut Vec::new()).unwrap();
    assert!((r.unwrap() - 1.0).abs() < 1e-12);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows, "seed,facts_count,reference_count\nA,6,3\nB,2,1\nC,4,2\n");
}

#[test]
fn binary_applies_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[crawl]\nmax_depth = 2\nuse_dk = true\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_kgcrawl"))
        .args(["--config", config.to_str().unwrap(), "crawl", "--seed", "Zorbia", "--depth", "1", "--no-dk"])
        .args(["--backend", "mock", "--mock-script"])
        .arg(fixtures().join("toy/mock.jsonl"))
        .arg("--out-dir")
        .arg(dir.path())
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(commands::RUN_FILE)).unwrap()).unwrap();
    assert_eq!(run["config"]["crawl"]["max_depth"], 1);
    assert_eq!(run["config"]["crawl"]["use_dk"], false);
}

#[test]
fn binary_reports_missing_inputs() {
    let out = Command::new(env!("CARGO_BIN_EXE_kgcrawl"))
        .args(["crawl", "--seed", "X", "--backend", "mock", "--mock-script", "/no/such/script.jsonl"])
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/script.jsonl"));
}
