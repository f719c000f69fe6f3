//! Retrieve context bundles at each granularity under a token budget.

use kinfuse::{retrieve, segment, Document, EntityIndex, Granularity, RetrievalConfig};

fn main() -> kinfuse::Result<()> {
    let doc = Document {
        doc_id: "d".into(),
        title: None,
        body: "Marie Curie was born in Warsaw. She moved to Paris in 1891.\n\n\
               Pierre Curie met Marie Curie in Paris. They shared a Nobel Prize.\n\n\
               Warsaw is on the Vistula."
            .into(),
        source_path: String::new(),
    };
    let index = EntityIndex::build(segment(&doc))?;
    let entities = ["Marie Curie", "Warsaw"];

    for granularity in [
        Granularity::Phrase,
        Granularity::Sentence,
        Granularity::Paragraph,
    ] {
        let cfg = RetrievalConfig {
            granularity,
            token_budget: 24,
            phrase_window: 3,
            ..Default::default()
        };
        let bundle = retrieve(&index, &entities, &cfg);
        println!(
            "{granularity:?}: {} tokens, truncated={}",
            bundle.total_tokens, bundle.truncated
        );
        for s in &bundle.snippets {
            println!("  [{}] {}", s.entity, s.text);
        }
    }
    Ok(())
}
