//! Score a prediction file against eval prompts and compute AED directly.

use std::path::Path;

use kinfuse::{aed, evaluate, MetricConfig, Triple};

fn main() -> kinfuse::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let report = evaluate(
        &fixtures.join("predictions.jsonl"),
        &fixtures.join("eval_prompts.jsonl"),
        &MetricConfig::default(),
    )?;
    println!("{report}");

    let gold = [
        Triple::new("a", "Ada", "knows", "Charles"),
        Triple::new("b", "Charles", "built", "Engine"),
    ];
    let pred = [
        Triple::new("a", "Ada", "knows", "Charles"),
        Triple::new("b", "Charles", "built", "Loom"),
    ];
    println!("aed, one chunk: {}", aed(&pred, &gold, 1)?);
    Ok(())
}
