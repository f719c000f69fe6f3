mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::fixtures;
use kinfuse::pipeline::{cmd_build, cmd_evaluate, cmd_index, cmd_inspect, Run};
use kinfuse::{
    evaluate, load_corpus, read_prompts, scan_leakage, segment_all, CorpusFormat, Segmenter,
};

/// The fixture config with every output redirected under `out`.
fn fixture_run(out: &Path) -> Run {
    let o = |name: &str| format!("{}", out.join(name).display());
    Run::load(
        &fixtures().join("run.toml"),
        &[
            format!("index.path={}", o("index")),
            format!("paths.train_out={}", o("train.jsonl")),
            format!("paths.eval_out={}", o("eval.jsonl")),
            format!("paths.report_out={}", o("report.txt")),
            format!("paths.manifest_dir={}", o("manifests")),
        ],
    )
    .unwrap()
}

fn full_run(out: &Path) -> Run {
    let run = fixture_run(out);
    cmd_index(&run).unwrap();
    cmd_build(&run).unwrap();
    cmd_evaluate(&run).unwrap();
    run
}

#[test]
fn fixture_corpus_has_300_units() {
    let docs = load_corpus(&fixtures().join("corpus"), CorpusFormat::PlainDir).unwrap();
    assert_eq!(segment_all(&docs, &Segmenter::default()).len(), 300);
}

#[test]
fn build_splits_and_attaches_context_to_train_only() {
    let dir = tempfile::tempdir().unwrap();
    let run = fixture_run(dir.path());
    let m = cmd_index(&run).unwrap();
    assert_eq!(m.counts["units"], 300);
    let m = cmd_build(&run).unwrap();
    assert_eq!(m.counts["skipped_leakage"], 0);

    let train = read_prompts(&dir.path().join("train.jsonl")).unwrap();
    let eval = read_prompts(&dir.path().join("eval.jsonl")).unwrap();
    assert_eq!((train.len(), eval.len()), (90, 10));
    assert!(train
        .iter()
        .all(|r| r.context_attached && r.meta.contains_key("context_ids")));
    assert!(eval
        .iter()
        .all(|r| !r.context_attached && !r.input_text.contains("Context:")));
    assert!(scan_leakage(&train).is_empty() && scan_leakage(&eval).is_empty());

    let manifest = dir.path().join("manifests/build.json");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(json["counts"]["train"], 90);
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn eval_prompts_match_checked_in_copy() {
    let dir = tempfile::tempdir().unwrap();
    full_run(dir.path());
    assert_eq!(
        fs::read_to_string(dir.path().join("eval.jsonl")).unwrap(),
        fs::read_to_string(fixtures().join("eval_prompts.jsonl")).unwrap()
    );
}

#[test]
fn two_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    full_run(a.path());
    full_run(b.path());
    for f in [
        "train.jsonl",
        "eval.jsonl",
        "report.txt",
        "index/postings.bin",
        "index/units.bin",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn cmd_evaluate_equals_module_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let run = full_run(dir.path());
    let (report, _) = cmd_evaluate(&run).unwrap();
    let direct = evaluate(
        &fixtures().join("predictions.jsonl"),
        &dir.path().join("eval.jsonl"),
        &run.config.metrics,
    )
    .unwrap();
    assert_eq!(report, direct);
    assert_eq!(report.n_examples, 10);
    // Gold ranks planted in the fixture: 1,1,2,3,5,7,10,absent,1,4.
    assert_eq!(report.hits[&1], 0.3);
    assert_eq!(report.hits[&5], 0.7);
    assert_eq!(report.hits[&10], 0.9);
    assert_eq!(report.exact_match_pct, 30.0);
    let text = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.starts_with("#schema=report/1\n"));
}

#[test]
fn inspect_lists_fixture_mentions() {
    let dir = tempfile::tempdir().unwrap();
    let run = fixture_run(dir.path());
    cmd_index(&run).unwrap();
    let out = cmd_inspect(&run.index_dir(), "Port Kessel").unwrap();
    assert!(out.starts_with("\"port kessel\":"), "{out}");
    assert!(out.contains("Nils Ostrander was born in Port Kessel."));
}

#[test]
fn stage_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let run = fixture_run(dir.path());
    let err = cmd_build(&run).unwrap_err();
    assert!(err.to_string().starts_with("stage `build` failed"), "{err}");
}

#[test]
fn cli_runs_all_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = |name: &str| format!("{}", dir.path().join(name).display());
    let sets = [
        format!("index.path={}", o("index")),
        format!("paths.train_out={}", o("train.jsonl")),
        format!("paths.eval_out={}", o("eval.jsonl")),
        format!("paths.report_out={}", o("report.txt")),
        format!("paths.manifest_dir={}", o("m")),
    ];
    let config = fixtures().join("run.toml");
    let run = |sub: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_kinfuse"));
        c.arg(sub).arg("--config").arg(&config);
        for s in &sets {
            c.arg("--set").arg(s);
        }
        c.output().unwrap()
    };
    for sub in ["index", "build", "evaluate"] {
        let out = run(sub);
        assert!(
            out.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let eval = String::from_utf8(run("evaluate").stdout).unwrap();
    assert!(eval.contains("Hits@10"), "{eval}");

    let out = Command::new(env!("CARGO_BIN_EXE_kinfuse"))
        .args(["inspect", "--index", &o("index"), "Galdra"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("mention"));

    let bad = Command::new(env!("CARGO_BIN_EXE_kinfuse"))
        .args(["build", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
