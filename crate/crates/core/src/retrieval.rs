//! Context assembly for a task instance's entities.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::SentenceUnit;
use crate::index::{EntityIndex, MentionLocation, Posting};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// The mention plus `phrase_window` tokens on each side.
    Phrase,
    Sentence,
    Paragraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub granularity: Granularity,
    /// Most units selected per entity.
    pub per_entity_k: usize,
    /// Most normalized tokens across all snippets.
    pub token_budget: usize,
    pub phrase_window: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            granularity: Granularity::Sentence,
            per_entity_k: 2,
            token_budget: 128,
            phrase_window: 8,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.per_entity_k == 0 || self.token_budget == 0 || self.phrase_window == 0 {
            return Err(crate::Error::Config(
                "retrieval per_entity_k, token_budget and phrase_window must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    /// The query entity this snippet was selected for.
    pub entity: String,
    pub text: String,
    pub provenance: MentionLocation,
    pub tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub snippets: Vec<Snippet>,
    pub total_tokens: usize,
    pub truncated: bool,
}

impl ContextBundle {
    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    /// `doc_id#para.sent` of every snippet, `;`-separated.
    pub fn provenance_ids(&self) -> String {
        self.snippets
            .iter()
            .map(|s| {
                let p = &s.provenance;
                format!("{}#{}.{}", p.doc_id, p.para_idx, p.sent_idx)
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

pub(crate) fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// Permutation of `units` in rank order.
fn rank_order(units: &[&SentenceUnit], queries: &[Vec<String>]) -> Vec<usize> {
    let distinct: Vec<usize> = units
        .iter()
        .map(|u| {
            queries
                .iter()
                .filter(|q| contains_phrase(&u.norm_tokens, q))
                .collect::<HashSet<_>>()
                .len()
        })
        .collect();
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (units[i], units[j]);
        distinct[j]
            .cmp(&distinct[i])
            .then(a.norm_tokens.len().cmp(&b.norm_tokens.len()))
            .then_with(|| a.key_ref().cmp(&b.key_ref()))
    });
    order
}

/// Order candidate units: most distinct query entities mentioned first, then
/// shorter units, then document order.
pub fn rank_candidates<'a, I, S>(units: I, query_entities: &[S]) -> Vec<&'a SentenceUnit>
where
    I: IntoIterator<Item = &'a SentenceUnit>,
    S: AsRef<str>,
{
    let queries: Vec<Vec<String>> = query_entities
        .iter()
        .map(|q| text::normalize(q.as_ref()))
        .collect();
    let units: Vec<&'a SentenceUnit> = units.into_iter().collect();
    rank_order(&units, &queries)
        .into_iter()
        .map(|i| units[i])
        .collect()
}

#[derive(PartialEq, Eq, Hash)]
enum DedupKey {
    Unit(u32),
    Paragraph(String, u32),
    Mention(u32, u32),
}

/// Greedily fill a context bundle, entity by entity, in the given order.
///
/// Each entity contributes at most `per_entity_k` snippets not already in
/// the bundle. The first snippet that would overflow `token_budget` stops the
/// fill and marks the bundle truncated.
pub fn retrieve<S: AsRef<str>>(
    index: &EntityIndex,
    entities: &[S],
    cfg: &RetrievalConfig,
) -> ContextBundle {
    let queries: Vec<Vec<String>> = entities
        .iter()
        .map(|e| text::normalize(e.as_ref()))
        .collect();
    let mut bundle = ContextBundle::default();
    let mut seen: HashSet<DedupKey> = HashSet::new();

    for (entity, query) in entities.iter().zip(&queries) {
        if query.is_empty() {
            continue;
        }
        let postings = index.lookup_normalized(query);
        // First mention per unit; postings are in unit order.
        let mut first_mention: Vec<Posting> = Vec::new();
        for p in postings {
            if first_mention.last().is_none_or(|last| last.unit != p.unit) {
                first_mention.push(p);
            }
        }
        let candidates: Vec<&SentenceUnit> = first_mention
            .iter()
            .map(|p| index.unit_at(p.unit))
            .collect();

        let mut taken = 0;
        for i in rank_order(&candidates, &queries) {
            if taken == cfg.per_entity_k {
                break;
            }
            let (unit, mention) = (candidates[i], first_mention[i]);
            let key = match cfg.granularity {
                Granularity::Sentence => DedupKey::Unit(mention.unit),
                Granularity::Paragraph => DedupKey::Paragraph(unit.doc_id.clone(), unit.para_idx),
                Granularity::Phrase => DedupKey::Mention(mention.unit, mention.token_start),
            };
            if seen.contains(&key) {
                continue;
            }
            let (snippet_text, tokens) = match cfg.granularity {
                Granularity::Sentence => (unit.text.clone(), unit.norm_tokens.len()),
                Granularity::Paragraph => {
                    let para = index.paragraph_units(&unit.doc_id, unit.para_idx);
                    (
                        para.iter()
                            .map(|u| u.text.as_str())
                            .collect::<Vec<_>>()
                            .join(" "),
                        para.iter().map(|u| u.norm_tokens.len()).sum(),
                    )
                }
                Granularity::Phrase => phrase_window(unit, &mention, cfg.phrase_window),
            };
            if bundle.total_tokens + tokens > cfg.token_budget {
                bundle.truncated = true;
                return bundle;
            }
            bundle.total_tokens += tokens;
            bundle.snippets.push(Snippet {
                entity: entity.as_ref().to_owned(),
                text: snippet_text,
                provenance: index.location(&mention),
                tokens,
            });
            seen.insert(key);
            taken += 1;
        }
    }
    bundle
}

/// Mention ± `window` tokens, sliced from the unit's original text.
fn phrase_window(unit: &SentenceUnit, mention: &Posting, window: usize) -> (String, usize) {
    let toks = text::tokenize(&unit.text);
    let start = (mention.token_start as usize).saturating_sub(window);
    let end = ((mention.token_start + mention.token_len) as usize + window).min(toks.len());
    let text = unit.text[toks[start].span.start..toks[end - 1].span.end].to_owned();
    (text, end - start)
}
