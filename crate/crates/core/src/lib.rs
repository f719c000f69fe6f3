//! Entity-context infusion for knowledge-intensive fine-tuning data.
//!
//! Build an inverted index of entity mentions over a sentence-segmented
//! corpus, attach retrieved context to training prompts only, and score
//! predictions with ranking, exact-match and graph-distance metrics.
//!
//! ```
//! use kinfuse::{segment, Document, EntityIndex, RetrievalConfig, retrieve};
//!
//! let doc = Document {
//!     doc_id: "d".into(),
//!     title: None,
//!     body: "Ada Lovelace wrote notes. Charles Babbage built engines.".into(),
//!     source_path: String::new(),
//! };
//! let index = EntityIndex::build(segment(&doc)).unwrap();
//! let bundle = retrieve(&index, &["Ada Lovelace"], &RetrievalConfig::default());
//! assert_eq!(bundle.snippets[0].text, "Ada Lovelace wrote notes.");
//! ```

pub mod corpus;
pub mod dataset;
mod error;
pub mod index;
pub mod metrics;
pub mod pipeline;
pub mod prompt;
pub mod retrieval;
pub mod text;

pub use corpus::{
    corpus_units, documents, load_corpus, segment, segment_all, verbatim_units, CorpusFormat,
    Document, Segmenter, SentenceUnit, UnitKey,
};
pub use dataset::{
    emit_prompts, read_predictions, read_prompts, read_qa, read_triples, split, write_predictions,
    Candidate, Fraction, PredictionRecord, QaFormat, QaItem, SplitSpec, SplitStrategy,
    TripleFormat,
};
pub use error::{Error, Result};
pub use index::{
    load_index, save_index, EntityIndex, EntityMatch, IndexBuilder, MentionLocation, VocabMode,
};
pub use metrics::{
    aed, evaluate, evaluate_records, exact_match, hits_at_k, mrr, normalize_answer, MetricConfig,
    MetricReport, Normalization,
};
pub use prompt::{
    build_qa_prompt, build_triple_prompt, scan_leakage, select_mask, select_mask_with, MaskPolicy,
    Mode, PromptRecord, PromptTemplate, Slot, Task, Triple,
};
pub use retrieval::{
    rank_candidates, retrieve, ContextBundle, Granularity, RetrievalConfig, Snippet,
};
pub use text::{normalize, tokenize, Token};
