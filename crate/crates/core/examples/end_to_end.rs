//! Run index, build and evaluate over the fixture config, writing into a
//! temporary directory.

use std::path::Path;

use kinfuse::pipeline::{cmd_build, cmd_evaluate, cmd_index, Run};

fn main() -> kinfuse::Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/run.toml");
    let out = std::env::temp_dir().join("kinfuse-example-run");
    let at = |name: &str| out.join(name).display().to_string();
    let run = Run::load(
        &config,
        &[
            format!("index.path={}", at("index")),
            format!("paths.train_out={}", at("train.jsonl")),
            format!("paths.eval_out={}", at("eval.jsonl")),
            format!("paths.report_out={}", at("report.txt")),
            format!("paths.manifest_dir={}", at("manifests")),
            "retrieval.token_budget=64".into(),
        ],
    )?;

    for (stage, m) in [("index", cmd_index(&run)?), ("build", cmd_build(&run)?)] {
        println!("{stage}: {:?}", m.counts);
    }
    let (report, _) = cmd_evaluate(&run)?;
    println!("{report}");
    println!("outputs in {}", out.display());
    Ok(())
}
