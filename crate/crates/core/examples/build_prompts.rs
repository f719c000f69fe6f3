//! Render train and eval prompts for one triple under every mask slot.

use kinfuse::{
    build_triple_prompt, retrieve, segment, select_mask, Document, EntityIndex, Mode,
    PromptTemplate, RetrievalConfig, Slot, Triple,
};

fn main() -> kinfuse::Result<()> {
    let doc = Document {
        doc_id: "d".into(),
        title: None,
        body: "Barack Obama served two terms. Michelle Obama wrote a memoir.".into(),
        source_path: String::new(),
    };
    let index = EntityIndex::build(segment(&doc))?;
    let triple = Triple::new("ex:0", "Barack Obama", "spouse", "Michelle Obama");
    let tmpl = PromptTemplate::triple_default();

    for slot in Slot::ALL {
        let query: Vec<&str> = Slot::ALL
            .iter()
            .filter(|&&s| s != slot)
            .map(|&s| triple.slot(s))
            .collect();
        let bundle = retrieve(&index, &query, &RetrievalConfig::default());
        let train = build_triple_prompt(&triple, slot, Some(&bundle), &tmpl, Mode::Train)?;
        let eval = build_triple_prompt(&triple, slot, None, &tmpl, Mode::Eval)?;
        println!("{slot} masked, target {:?}", train.target_text);
        println!("  train: {}", train.input_text);
        println!("  eval:  {}", eval.input_text);
    }
    println!(
        "seeded mask for ex:0 with seed 7: {}",
        select_mask(&triple, 7)
    );
    Ok(())
}
