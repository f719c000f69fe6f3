//! Read triples and split them 9:1, randomly and by head entity.

use std::collections::BTreeSet;
use std::path::Path;

use kinfuse::{read_triples, split, SplitSpec, SplitStrategy, TripleFormat};

fn main() -> kinfuse::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/triples.tsv");
    let triples = read_triples(&path, TripleFormat::Tsv3)?;

    let (train, eval) = split(&triples, &SplitSpec::default());
    println!("random: {} train, {} eval", train.len(), eval.len());

    let by_head = SplitSpec {
        strategy: SplitStrategy::ByHeadEntity,
        ..SplitSpec::default()
    };
    let (train, eval) = split(&triples, &by_head);
    let heads = |ts: &[kinfuse::Triple]| ts.iter().map(|t| t.head.clone()).collect::<BTreeSet<_>>();
    println!(
        "by head: {} train, {} eval, {} shared heads",
        train.len(),
        eval.len(),
        heads(&train).intersection(&heads(&eval)).count()
    );
    Ok(())
}
