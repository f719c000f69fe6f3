//! Synthetic data and naive reference implementations shared by the
//! integration tests and the acceptance binary.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use kinfuse::{Candidate, PredictionRecord, SentenceUnit, Triple};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "tus", "va", "dor", "el", "qui", "sa", "bran", "to", "fe", "nix",
    "ul", "gar", "pe", "zo", "hal", "ith",
];

fn word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| *SYLLABLES.choose(rng).unwrap())
        .collect()
}

/// A synthetic corpus of `n_units` sentence units and `n_entities` entity
/// surfaces planted in them. Some entities are prefixes of others and one
/// is eight tokens long.
pub struct Synthetic {
    pub units: Vec<SentenceUnit>,
    pub entities: Vec<String>,
}

pub fn synthetic(n_units: usize, n_entities: usize, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler: Vec<String> = (0..400).map(|_| word(&mut rng, 2)).collect();
    let mut entities: Vec<String> = Vec::new();
    while entities.len() < n_entities {
        let e = match entities.len() {
            0 => (0..8)
                .map(|_| word(&mut rng, 3))
                .collect::<Vec<_>>()
                .join(" "),
            i if i % 10 == 3 => {
                // Extend an earlier entity so nested matches occur.
                let base = entities[rng.gen_range(0..i)].clone();
                format!("{base} {}", word(&mut rng, 3))
            }
            i if i % 10 == 7 => filler[rng.gen_range(0..filler.len())].clone(),
            _ => {
                let n = rng.gen_range(1..=4);
                (0..n)
                    .map(|_| word(&mut rng, 3))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        };
        if !entities.contains(&e) {
            entities.push(e);
        }
    }
    let mut units = Vec::with_capacity(n_units);
    for i in 0..n_units {
        let mut parts: Vec<String> = Vec::new();
        let len = rng.gen_range(4..16);
        for _ in 0..len {
            if rng.gen_bool(0.12) {
                parts.push(entities[rng.gen_range(0..entities.len())].clone());
            } else {
                parts.push(filler[rng.gen_range(0..filler.len())].clone());
            }
        }
        let mut text = parts.join(" ");
        text[..1].make_ascii_uppercase();
        text.push('.');
        units.push(SentenceUnit {
            doc_id: format!("d{:05}", i / 40),
            para_idx: ((i % 40) / 8) as u32,
            sent_idx: (i % 8) as u32,
            norm_tokens: kinfuse::normalize(&text),
            char_span: (0, text.len()),
            text,
        });
    }
    Synthetic { units, entities }
}

/// (doc, para, sent, token_start, token_len) for every occurrence of
/// `phrase`, by brute-force sliding window over every unit.
pub type Loc = (String, u32, u32, u32, u32);

pub fn naive_lookup(units: &[SentenceUnit], surface: &str) -> Vec<Loc> {
    let phrase = kinfuse::normalize(surface);
    let mut out = Vec::new();
    if phrase.is_empty() {
        return out;
    }
    for u in units {
        let t = &u.norm_tokens;
        if t.len() < phrase.len() {
            continue;
        }
        for start in 0..=t.len() - phrase.len() {
            if t[start..start + phrase.len()] == phrase[..] {
                out.push((
                    u.doc_id.clone(),
                    u.para_idx,
                    u.sent_idx,
                    start as u32,
                    phrase.len() as u32,
                ));
            }
        }
    }
    out.sort();
    out
}

pub fn locs(found: &[kinfuse::MentionLocation]) -> Vec<Loc> {
    found
        .iter()
        .map(|m| {
            (
                m.doc_id.clone(),
                m.para_idx,
                m.sent_idx,
                m.token_start,
                m.token_len,
            )
        })
        .collect()
}

/// Greedy longest-match cover: at each position try every phrase and keep
/// the longest that matches. Returns (surface, token_start, token_len).
pub fn naive_cover(phrases: &[String], text: &str) -> Vec<(String, usize, usize)> {
    let toks = kinfuse::normalize(text);
    let phrases: Vec<Vec<String>> = phrases.iter().map(|p| kinfuse::normalize(p)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut best: Option<&Vec<String>> = None;
        for p in &phrases {
            let fits = !p.is_empty() && i + p.len() <= toks.len() && toks[i..i + p.len()] == p[..];
            if fits && best.is_none_or(|b| p.len() > b.len()) {
                best = Some(p);
            }
        }
        match best {
            Some(p) => {
                out.push((p.join(" "), i, p.len()));
                i += p.len();
            }
            None => i += 1,
        }
    }
    out
}

/// Retrieval by hand: scan every unit, rank, dedupe, stop at the budget.
/// Sentence and paragraph granularity only.
pub fn naive_retrieve(
    units: &[SentenceUnit],
    entities: &[String],
    paragraph: bool,
    k: usize,
    budget: usize,
) -> (Vec<(String, String)>, usize, bool) {
    let mut sorted: Vec<&SentenceUnit> = units.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.doc_id, a.para_idx, a.sent_idx).cmp(&(&b.doc_id, b.para_idx, b.sent_idx))
    });
    let queries: Vec<Vec<String>> = entities.iter().map(|e| kinfuse::normalize(e)).collect();
    let contains = |u: &SentenceUnit, q: &[String]| {
        !q.is_empty() && u.norm_tokens.windows(q.len()).any(|w| w == q)
    };
    let mut out: Vec<(String, String)> = Vec::new();
    let mut seen: Vec<(String, u32, u32)> = Vec::new();
    let mut total = 0;
    for (e, q) in entities.iter().zip(&queries) {
        let mut cands: Vec<&SentenceUnit> =
            sorted.iter().copied().filter(|u| contains(u, q)).collect();
        let score = |u: &SentenceUnit| {
            let mut distinct: Vec<&Vec<String>> =
                queries.iter().filter(|q| contains(u, q)).collect();
            distinct.sort();
            distinct.dedup();
            distinct.len()
        };
        // Stable sort keeps document order as the last key.
        cands.sort_by(|a, b| {
            score(b)
                .cmp(&score(a))
                .then(a.norm_tokens.len().cmp(&b.norm_tokens.len()))
        });
        let mut taken = 0;
        for u in cands {
            if taken == k {
                break;
            }
            let key = if paragraph {
                (u.doc_id.clone(), u.para_idx, 0)
            } else {
                (u.doc_id.clone(), u.para_idx, u.sent_idx)
            };
            if seen.contains(&key) {
                continue;
            }
            let (text, n) = if paragraph {
                let para: Vec<&SentenceUnit> = sorted
                    .iter()
                    .copied()
                    .filter(|x| x.doc_id == u.doc_id && x.para_idx == u.para_idx)
                    .collect();
                (
                    para.iter()
                        .map(|x| x.text.clone())
                        .collect::<Vec<_>>()
                        .join(" "),
                    para.iter().map(|x| x.norm_tokens.len()).sum(),
                )
            } else {
                (u.text.clone(), u.norm_tokens.len())
            };
            if total + n > budget {
                return (out, total, true);
            }
            total += n;
            out.push((e.clone(), text));
            seen.push(key);
            taken += 1;
        }
    }
    (out, total, false)
}

/// Random prediction records with gold planted at a uniform rank or absent.
pub fn random_predictions(n: usize, seed: u64) -> (Vec<PredictionRecord>, HashMap<String, String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preds = Vec::new();
    let mut gold = HashMap::new();
    for i in 0..n {
        let id = format!("r{i:04}");
        let answer = format!("Answer {i}");
        let mut texts: Vec<String> = (0..10).map(|j| format!("wrong {i} {j}")).collect();
        let slot = rng.gen_range(0..11);
        if slot < 10 {
            // Mixed case so the normalization path is exercised.
            texts[slot] = if rng.gen_bool(0.5) {
                answer.to_uppercase()
            } else {
                answer.clone()
            };
        }
        let mut score = 0.0;
        let candidates = texts
            .into_iter()
            .map(|text| {
                score -= rng.gen_range(0.0..1.0);
                Candidate { text, score }
            })
            .collect();
        preds.push(PredictionRecord {
            example_id: id.clone(),
            candidates,
        });
        gold.insert(id, answer);
    }
    (preds, gold)
}

/// Hits@k, MRR and EM (percent) by explicit loops.
pub fn naive_metrics(
    preds: &[PredictionRecord],
    gold: &HashMap<String, String>,
) -> ([f64; 3], f64, f64) {
    let mut hits = [0usize; 3];
    let mut rr = 0.0;
    let mut em = 0usize;
    for p in preds {
        let g = gold[&p.example_id].trim().to_lowercase();
        let mut rank = 0;
        for (i, c) in p.candidates.iter().enumerate() {
            if c.text.trim().to_lowercase() == g {
                rank = i + 1;
                break;
            }
        }
        if rank == 0 {
            continue;
        }
        for (slot, k) in [1, 5, 10].iter().enumerate() {
            if rank <= *k {
                hits[slot] += 1;
            }
        }
        rr += 1.0 / rank as f64;
        if rank == 1 {
            em += 1;
        }
    }
    let n = preds.len() as f64;
    (hits.map(|h| h as f64 / n), rr / n, 100.0 * em as f64 / n)
}

/// Graph distance by linear scans over deduplicated vectors.
pub fn naive_aed(pred: &[Triple], gold: &[Triple], chunks: usize) -> f64 {
    let size = pred.len().div_ceil(chunks);
    let norm = |s: &str| s.trim().to_lowercase();
    let graph = |ts: &[Triple]| {
        let mut nodes: Vec<String> = Vec::new();
        let mut edges: Vec<(String, String, String)> = Vec::new();
        for t in ts {
            for n in [norm(&t.head), norm(&t.tail)] {
                if !nodes.contains(&n) {
                    nodes.push(n);
                }
            }
            let e = (norm(&t.head), norm(&t.relation), norm(&t.tail));
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        (nodes, edges)
    };
    let mut sum = 0usize;
    let mut count = 0usize;
    let mut start = 0;
    while start < pred.len() {
        let end = (start + size).min(pred.len());
        let (pn, pe) = graph(&pred[start..end]);
        let (gn, ge) = graph(&gold[start..end]);
        let d = pn.iter().filter(|x| !gn.contains(x)).count()
            + gn.iter().filter(|x| !pn.contains(x)).count()
            + pe.iter().filter(|x| !ge.contains(x)).count()
            + ge.iter().filter(|x| !pe.contains(x)).count();
        sum += d;
        count += 1;
        start = end;
    }
    sum as f64 / count as f64
}

/// 40 gold triples and a perturbed prediction: some tails, relations and
/// heads swapped, some left intact.
pub fn aed_fixture(seed: u64) -> (Vec<Triple>, Vec<Triple>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..15).map(|i| format!("Entity {i}")).collect();
    let rels = ["born_in", "spouse", "works_for", "mentor_of"];
    let gold: Vec<Triple> = (0..40)
        .map(|i| {
            Triple::new(
                &format!("g:{i}"),
                names.choose(&mut rng).unwrap(),
                rels.choose(&mut rng).unwrap(),
                names.choose(&mut rng).unwrap(),
            )
        })
        .collect();
    let pred = gold
        .iter()
        .map(|t| {
            let mut p = t.clone();
            match rng.gen_range(0..5) {
                0 => p.tail = names.choose(&mut rng).unwrap().clone(),
                1 => p.relation = rels.choose(&mut rng).unwrap().to_string(),
                2 => p.head = format!("Unseen {}", rng.gen_range(0..5)),
                3 => p.tail = p.tail.to_uppercase(),
                _ => {}
            }
            p
        })
        .collect();
    (pred, gold)
}
