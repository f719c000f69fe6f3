//! Load a plain-text corpus directory and print its sentence units.
//!
//! cargo run --example segment_corpus [DIR]

use std::path::PathBuf;

use kinfuse::{load_corpus, segment_all, CorpusFormat, Segmenter};

fn main() -> kinfuse::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus"));
    let docs = load_corpus(&dir, CorpusFormat::PlainDir)?;
    let units = segment_all(&docs, &Segmenter::default());
    for u in units.iter().take(8) {
        println!(
            "{:<10} {:>2} tokens  {}",
            u.key().to_string(),
            u.norm_tokens.len(),
            u.text
        );
    }
    println!("{} documents, {} units", docs.len(), units.len());
    Ok(())
}
