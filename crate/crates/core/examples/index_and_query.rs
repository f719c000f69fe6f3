//! Build an entity index, look up mentions, tag a question, and round-trip
//! the index through disk.

use kinfuse::{load_index, save_index, segment, Document, IndexBuilder};

fn main() -> kinfuse::Result<()> {
    let doc = Document {
        doc_id: "bio".into(),
        title: None,
        body: "Dr. Ada Lovelace wrote the first program. She worked with Charles Babbage.\n\n\
               Charles Babbage designed the Analytical Engine."
            .into(),
        source_path: String::new(),
    };
    let units = segment(&doc);

    let open = IndexBuilder::new().build(units.clone())?;
    for m in open.lookup("Charles Babbage") {
        println!(
            "charles babbage @ {}#{}.{} token {}",
            m.doc_id, m.para_idx, m.sent_idx, m.token_start
        );
    }

    // A closed vocabulary only indexes the listed phrases.
    let closed = IndexBuilder::new()
        .vocab(["Ada Lovelace", "Charles Babbage", "Analytical Engine"])
        .build(units)?;
    for e in closed.extract_entities("Did Ada Lovelace know about the Analytical Engine?") {
        println!("entity {:?} at tokens {:?}", e.surface, e.token_span);
    }

    let dir = std::env::temp_dir().join("kinfuse-example-index");
    save_index(&closed, &dir)?;
    let loaded = load_index(&dir)?;
    print!("{}", loaded.inspect("Analytical Engine"));
    Ok(())
}
