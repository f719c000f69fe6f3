//! Inverted index from normalized entity phrases to their mentions.
//!
//! Two vocabulary modes exist. With a phrase vocabulary the index holds
//! exactly the occurrences of those phrases; without one it holds every
//! contiguous n-gram up to `max_ngram` tokens. Phrases are bucketed by their
//! first token and kept sorted inside each bucket.

mod persist;

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{SentenceUnit, UnitKey};
use crate::error::{Error, Result};
use crate::text;

pub use persist::{load_index, save_index, FORMAT_VERSION};

pub const DEFAULT_MAX_NGRAM: usize = 6;

/// Where a phrase occurs: a token span inside one unit's `norm_tokens`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MentionLocation {
    pub doc_id: String,
    pub para_idx: u32,
    pub sent_idx: u32,
    pub token_start: u32,
    pub token_len: u32,
}

impl MentionLocation {
    pub fn unit_key(&self) -> UnitKey {
        UnitKey {
            doc_id: self.doc_id.clone(),
            para_idx: self.para_idx,
            sent_idx: self.sent_idx,
        }
    }
}

/// Compact posting; `unit` is the ordinal in the index's unit store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Posting {
    pub unit: u32,
    pub token_start: u32,
    pub token_len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabMode {
    /// Every n-gram up to the given length.
    Open { max_ngram: usize },
    /// Only phrases of a supplied vocabulary.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexManifest {
    pub format_version: u32,
    pub corpus_fingerprint: String,
    pub unit_count: usize,
    pub phrase_count: usize,
    pub posting_count: usize,
    pub mode: VocabMode,
}

#[derive(Debug, Clone)]
pub(crate) struct PhraseEntry {
    pub(crate) phrase: Box<[u32]>,
    pub(crate) postings: Vec<Posting>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct TokenTable {
    ids: HashMap<String, u32>,
    strings: Vec<String>,
}

impl TokenTable {
    fn intern(&mut self, tok: &str) -> u32 {
        if let Some(&id) = self.ids.get(tok) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.ids.insert(tok.to_owned(), id);
        self.strings.push(tok.to_owned());
        id
    }

    fn get(&self, tok: &str) -> Option<u32> {
        self.ids.get(tok).copied()
    }

    pub(crate) fn resolve(&self, id: u32) -> &str {
        &self.strings[id as usize]
    }
}

/// An entity surface matched in free text by [`EntityIndex::extract_entities`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMatch {
    /// The normalized phrase, tokens joined by single spaces.
    pub surface: String,
    /// Token positions in the normalized text.
    pub token_span: Range<usize>,
    /// Byte offsets in the original text.
    pub byte_span: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct IndexBuilder {
    max_ngram: usize,
    vocab: Option<Vec<String>>,
}

impl Default for IndexBuilder {
    fn default() -> Self {
        Self {
            max_ngram: DEFAULT_MAX_NGRAM,
            vocab: None,
        }
    }
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn max_ngram(mut self, n: usize) -> Self {
        self.max_ngram = n.max(1);
        self
    }

    /// Restrict the index to these entity strings (normalized on insert).
    pub fn vocab<I, S>(mut self, vocab: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.vocab = Some(vocab.into_iter().map(|s| s.as_ref().to_owned()).collect());
        self
    }

    pub fn build(self, units: impl IntoIterator<Item = SentenceUnit>) -> Result<EntityIndex> {
        let mut units: Vec<SentenceUnit> = units.into_iter().collect();
        units.sort_by(|a, b| a.key_ref().cmp(&b.key_ref()));
        if let Some(w) = units.windows(2).find(|w| w[0].key_ref() == w[1].key_ref()) {
            return Err(Error::DuplicateUnit(w[1].key().to_string()));
        }

        let mut tokens = TokenTable::default();
        let unit_ids: Vec<Vec<u32>> = units
            .iter()
            .map(|u| u.norm_tokens.iter().map(|t| tokens.intern(t)).collect())
            .collect();

        let mut table: HashMap<Box<[u32]>, Vec<Posting>> = HashMap::new();
        let mode = match self.vocab {
            None => {
                let n = self.max_ngram;
                for (ui, ids) in unit_ids.iter().enumerate() {
                    for start in 0..ids.len() {
                        for len in 1..=n.min(ids.len() - start) {
                            table
                                .entry(ids[start..start + len].into())
                                .or_default()
                                .push(Posting {
                                    unit: ui as u32,
                                    token_start: start as u32,
                                    token_len: len as u32,
                                });
                        }
                    }
                }
                VocabMode::Open { max_ngram: n }
            }
            Some(vocab) => {
                let mut phrases: HashSet<Box<[u32]>> = HashSet::new();
                let mut longest = 0;
                for v in &vocab {
                    let norm = text::normalize(v);
                    if norm.is_empty() {
                        continue;
                    }
                    let ids: Box<[u32]> = norm.iter().map(|t| tokens.intern(t)).collect();
                    longest = longest.max(ids.len());
                    table.entry(ids.clone()).or_default();
                    phrases.insert(ids);
                }
                for (ui, ids) in unit_ids.iter().enumerate() {
                    for start in 0..ids.len() {
                        for len in 1..=longest.min(ids.len() - start) {
                            let window = &ids[start..start + len];
                            if phrases.contains(window) {
                                table.get_mut(window).expect("vocab phrase").push(Posting {
                                    unit: ui as u32,
                                    token_start: start as u32,
                                    token_len: len as u32,
                                });
                            }
                        }
                    }
                }
                VocabMode::Closed
            }
        };

        let fingerprint = corpus_fingerprint(&units);
        Ok(EntityIndex::assemble(
            units,
            tokens,
            table,
            mode,
            fingerprint,
        ))
    }
}

/// SHA-256 over unit identities and texts, in store order.
fn corpus_fingerprint(units: &[SentenceUnit]) -> String {
    let mut h = Sha256::new();
    for u in units {
        h.update(u.doc_id.as_bytes());
        h.update([0]);
        h.update(u.para_idx.to_le_bytes());
        h.update(u.sent_idx.to_le_bytes());
        h.update(u.text.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct EntityIndex {
    pub(crate) units: Vec<SentenceUnit>,
    unit_lookup: HashMap<UnitKey, u32>,
    pub(crate) tokens: TokenTable,
    pub(crate) buckets: HashMap<u32, Vec<PhraseEntry>>,
    longest_phrase: usize,
    pub(crate) manifest: IndexManifest,
}

impl EntityIndex {
    /// Build with default settings: open vocabulary, n-grams up to 6.
    pub fn build(units: impl IntoIterator<Item = SentenceUnit>) -> Result<Self> {
        IndexBuilder::new().build(units)
    }

    pub(crate) fn assemble(
        units: Vec<SentenceUnit>,
        tokens: TokenTable,
        table: HashMap<Box<[u32]>, Vec<Posting>>,
        mode: VocabMode,
        corpus_fingerprint: String,
    ) -> Self {
        let mut buckets: HashMap<u32, Vec<PhraseEntry>> = HashMap::new();
        let mut posting_count = 0;
        let phrase_count = table.len();
        let mut longest_phrase = 0;
        for (phrase, mut postings) in table {
            postings.sort_unstable();
            posting_count += postings.len();
            longest_phrase = longest_phrase.max(phrase.len());
            buckets
                .entry(phrase[0])
                .or_default()
                .push(PhraseEntry { phrase, postings });
        }
        for bucket in buckets.values_mut() {
            bucket.sort_unstable_by(|a, b| a.phrase.cmp(&b.phrase));
        }
        let unit_lookup = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.key(), i as u32))
            .collect();
        let manifest = IndexManifest {
            format_version: FORMAT_VERSION,
            corpus_fingerprint,
            unit_count: units.len(),
            phrase_count,
            posting_count,
            mode,
        };
        Self {
            units,
            unit_lookup,
            tokens,
            buckets,
            longest_phrase,
            manifest,
        }
    }

    pub fn manifest(&self) -> &IndexManifest {
        &self.manifest
    }

    pub fn units(&self) -> &[SentenceUnit] {
        &self.units
    }

    pub fn unit(&self, key: &UnitKey) -> Option<&SentenceUnit> {
        self.unit_lookup.get(key).map(|&i| &self.units[i as usize])
    }

    pub fn unit_at(&self, ordinal: u32) -> &SentenceUnit {
        &self.units[ordinal as usize]
    }

    /// Every unit of the paragraph `(doc_id, para_idx)`, in sentence order.
    pub fn paragraph_units(&self, doc_id: &str, para_idx: u32) -> &[SentenceUnit] {
        let lo = self
            .units
            .partition_point(|u| (u.doc_id.as_str(), u.para_idx) < (doc_id, para_idx));
        let hi = self
            .units
            .partition_point(|u| (u.doc_id.as_str(), u.para_idx) <= (doc_id, para_idx));
        &self.units[lo..hi]
    }

    fn ids_of(&self, norm: &[String]) -> Option<Vec<u32>> {
        norm.iter().map(|t| self.tokens.get(t)).collect()
    }

    fn entry(&self, ids: &[u32]) -> Option<&PhraseEntry> {
        let bucket = self.buckets.get(ids.first()?)?;
        bucket
            .binary_search_by(|e| e.phrase.as_ref().cmp(ids))
            .ok()
            .map(|i| &bucket[i])
    }

    /// Postings for a surface form, in `(doc_id, para_idx, sent_idx, token_start)` order.
    pub fn lookup_postings(&self, surface: &str) -> Vec<Posting> {
        self.lookup_normalized(&text::normalize(surface))
    }

    pub(crate) fn lookup_normalized(&self, norm: &[String]) -> Vec<Posting> {
        if norm.is_empty() {
            return Vec::new();
        }
        let Some(ids) = self.ids_of(norm) else {
            return Vec::new();
        };
        match self.manifest.mode {
            VocabMode::Open { max_ngram } if ids.len() > max_ngram => {
                // Longer than any indexed n-gram: verify the tail in the unit store.
                let Some(prefix) = self.entry(&ids[..max_ngram]) else {
                    return Vec::new();
                };
                prefix
                    .postings
                    .iter()
                    .filter(|p| {
                        let unit = &self.units[p.unit as usize].norm_tokens;
                        let s = p.token_start as usize;
                        s + norm.len() <= unit.len() && unit[s..s + norm.len()] == *norm
                    })
                    .map(|p| Posting {
                        token_len: norm.len() as u32,
                        ..*p
                    })
                    .collect()
            }
            _ => self
                .entry(&ids)
                .map(|e| e.postings.clone())
                .unwrap_or_default(),
        }
    }

    pub fn location(&self, p: &Posting) -> MentionLocation {
        let u = &self.units[p.unit as usize];
        MentionLocation {
            doc_id: u.doc_id.clone(),
            para_idx: u.para_idx,
            sent_idx: u.sent_idx,
            token_start: p.token_start,
            token_len: p.token_len,
        }
    }

    /// Exact contiguous match of the normalized surface; empty when unknown.
    pub fn lookup(&self, surface: &str) -> Vec<MentionLocation> {
        self.lookup_postings(surface)
            .iter()
            .map(|p| self.location(p))
            .collect()
    }

    /// Whether `ids` is an indexed phrase.
    fn is_indexed(&self, ids: &[u32]) -> bool {
        self.entry(ids).is_some()
    }

    /// Dictionary entity recognition: greedy longest match, left to right,
    /// non-overlapping, against the indexed phrases.
    pub fn extract_entities(&self, text: &str) -> Vec<EntityMatch> {
        let toks = text::tokenize(text);
        let ids: Vec<Option<u32>> = toks.iter().map(|t| self.tokens.get(&t.text)).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            let max_len = self.longest_phrase.min(toks.len() - i);
            let mut matched = 0;
            for len in (1..=max_len).rev() {
                let window: Option<Vec<u32>> = ids[i..i + len].iter().copied().collect();
                if window.is_some_and(|w| self.is_indexed(&w)) {
                    matched = len;
                    break;
                }
            }
            if matched == 0 {
                i += 1;
                continue;
            }
            let span = &toks[i..i + matched];
            out.push(EntityMatch {
                surface: span
                    .iter()
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
                token_span: i..i + matched,
                byte_span: span[0].span.start..span[matched - 1].span.end,
            });
            i += matched;
        }
        out
    }

    /// All indexed phrases (normalized, space-joined), sorted.
    pub fn phrases(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .buckets
            .values()
            .flatten()
            .map(|e| self.phrase_string(&e.phrase))
            .collect();
        out.sort();
        out
    }

    pub(crate) fn phrase_string(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&id| self.tokens.resolve(id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Human-readable dump of a surface form's postings.
    pub fn inspect(&self, surface: &str) -> String {
        use std::fmt::Write;
        let key = text::phrase_key(surface);
        let postings = self.lookup_postings(surface);
        let mut out = format!("{key:?}: {} mention(s)\n", postings.len());
        for p in &postings {
            let u = &self.units[p.unit as usize];
            let _ = writeln!(
                out,
                "  {}#{}.{} tokens {}..{}  {}",
                u.doc_id,
                u.para_idx,
                u.sent_idx,
                p.token_start,
                p.token_start + p.token_len,
                u.text
            );
        }
        out
    }
}
