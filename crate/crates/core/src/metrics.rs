//! Ranking metrics (Hits@K, MRR, exact match) and the approximate graph
//! edit distance between predicted and gold triple sets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{read_predictions, read_prompts, PredictionRecord};
use crate::error::{Error, Result};
use crate::prompt::{MaskTarget, PromptRecord, Slot, Triple};

pub const REPORT_SCHEMA: &str = "report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Trim and case-fold.
    Strict,
    /// Strict, then strip punctuation, collapse whitespace and drop a
    /// leading article.
    Lenient,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Strict => "strict",
            Normalization::Lenient => "lenient",
        }
    }
}

pub fn normalize_answer(s: &str, mode: Normalization) -> String {
    let strict = s.trim().to_lowercase();
    if mode == Normalization::Strict {
        return strict;
    }
    let stripped: String = strict
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    let mut words: Vec<&str> = stripped.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0], "a" | "an" | "the") {
        words.remove(0);
    }
    words.join(" ")
}

/// 1-based rank of the first candidate matching `gold`.
fn first_match_rank(pred: &PredictionRecord, gold: &str, mode: Normalization) -> Option<usize> {
    let gold = normalize_answer(gold, mode);
    pred.candidates
        .iter()
        .position(|c| normalize_answer(&c.text, mode) == gold)
        .map(|i| i + 1)
}

fn gold_for<'a>(
    preds: &[PredictionRecord],
    gold: &'a HashMap<String, String>,
) -> Result<Vec<&'a str>> {
    if preds.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let mut missing = Vec::new();
    let out = preds
        .iter()
        .filter_map(|p| match gold.get(&p.example_id) {
            Some(g) => Some(g.as_str()),
            None => {
                missing.push(p.example_id.clone());
                None
            }
        })
        .collect();
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(Error::MissingGold(missing))
    }
}

/// Fraction of examples whose gold answer is among the top `k` candidates.
///
/// Every candidate list must hold at least `k` entries.
pub fn hits_at_k(
    preds: &[PredictionRecord],
    gold: &HashMap<String, String>,
    k: usize,
    mode: Normalization,
) -> Result<f64> {
    let golds = gold_for(preds, gold)?;
    if let Some(short) = preds.iter().find(|p| p.candidates.len() < k) {
        return Err(Error::InsufficientCandidates {
            example_id: short.example_id.clone(),
            found: short.candidates.len(),
            k,
        });
    }
    let hits = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| first_match_rank(p, g, mode).is_some_and(|r| r <= k))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean reciprocal rank; an answer missing from the list scores 0.
pub fn mrr(
    preds: &[PredictionRecord],
    gold: &HashMap<String, String>,
    mode: Normalization,
) -> Result<f64> {
    let golds = gold_for(preds, gold)?;
    let total: f64 = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| first_match_rank(p, g, mode).map_or(0.0, |r| 1.0 / r as f64))
        .sum();
    Ok(total / preds.len() as f64)
}

/// Percentage of examples whose top candidate equals the gold answer.
pub fn exact_match(
    preds: &[PredictionRecord],
    gold: &HashMap<String, String>,
    mode: Normalization,
) -> Result<f64> {
    let golds = gold_for(preds, gold)?;
    let hits = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| first_match_rank(p, g, mode) == Some(1))
        .count();
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

#[derive(Default)]
struct TripleGraph {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String, String)>,
}

impl TripleGraph {
    fn from_triples(triples: &[Triple]) -> Self {
        let mut g = Self::default();
        for t in triples {
            let n = |s: &str| normalize_answer(s, Normalization::Strict);
            let (h, r, tl) = (n(&t.head), n(&t.relation), n(&t.tail));
            g.nodes.insert(h.clone());
            g.nodes.insert(tl.clone());
            g.edges.insert((h, r, tl));
        }
        g
    }

    fn distance(&self, other: &Self) -> usize {
        self.nodes.symmetric_difference(&other.nodes).count()
            + self.edges.symmetric_difference(&other.edges).count()
    }
}

/// Approximate graph edit distance.
///
/// The aligned example sequence is cut into contiguous chunks of
/// `ceil(n / chunks)` examples (the last may be shorter). Each chunk's
/// triples form a labelled directed graph on normalized entity strings; the
/// chunk distance is the size of the node symmetric difference plus the
/// size of the edge symmetric difference. Returns the mean over chunks.
pub fn aed(pred_triples: &[Triple], gold_triples: &[Triple], chunks: usize) -> Result<f64> {
    if pred_triples.is_empty() || gold_triples.is_empty() {
        return Err(Error::Empty("AED needs at least one triple".into()));
    }
    if pred_triples.len() != gold_triples.len() {
        return Err(Error::Validation(format!(
            "AED inputs are not aligned: {} predicted vs {} gold triples",
            pred_triples.len(),
            gold_triples.len()
        )));
    }
    if chunks == 0 {
        return Err(Error::Config("aed_chunks must be positive".into()));
    }
    let size = pred_triples.len().div_ceil(chunks);
    let distances: Vec<usize> = pred_triples
        .chunks(size)
        .zip(gold_triples.chunks(size))
        .map(|(p, g)| TripleGraph::from_triples(p).distance(&TripleGraph::from_triples(g)))
        .collect();
    Ok(distances.iter().sum::<usize>() as f64 / distances.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub ks: Vec<usize>,
    /// `None` picks lenient for QA gold and strict otherwise.
    pub normalization: Option<Normalization>,
    pub aed_chunks: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 10],
            normalization: None,
            aed_chunks: 4,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "metrics ks must be positive and strictly ascending".into(),
            ));
        }
        if self.aed_chunks == 0 {
            return Err(Error::Config("aed_chunks must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hits: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub exact_match_pct: f64,
    /// Absent when the gold records are not triples.
    pub aed: Option<f64>,
    pub n_examples: usize,
    pub normalization: Normalization,
    pub aed_chunks: usize,
}

/// Gold triple stored in a prompt record's metadata.
fn gold_triple(r: &PromptRecord) -> Option<Triple> {
    let get = |s: Slot| r.meta.get(s.as_str()).cloned();
    Some(Triple {
        head: get(Slot::Head)?,
        relation: get(Slot::Relation)?,
        tail: get(Slot::Tail)?,
        aligned_sentence: None,
        example_id: r.example_id.clone(),
    })
}

/// Score predictions against gold prompt records (the eval prompt file).
pub fn evaluate_records(
    preds: &[PredictionRecord],
    gold: &[PromptRecord],
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    if preds.is_empty() {
        return Err(Error::Empty("prediction set is empty".into()));
    }
    let mut preds: Vec<PredictionRecord> = preds.to_vec();
    preds.sort_by(|a, b| a.example_id.cmp(&b.example_id));

    let by_id: HashMap<&str, &PromptRecord> =
        gold.iter().map(|r| (r.example_id.as_str(), r)).collect();
    let answers: HashMap<String, String> = gold
        .iter()
        .map(|r| (r.example_id.clone(), r.target_text.clone()))
        .collect();
    let all_qa = preds
        .iter()
        .filter_map(|p| by_id.get(p.example_id.as_str()))
        .all(|r| r.mask_target == MaskTarget::None);
    let mode = cfg.normalization.unwrap_or(if all_qa {
        Normalization::Lenient
    } else {
        Normalization::Strict
    });

    let mut hits = BTreeMap::new();
    for &k in &cfg.ks {
        hits.insert(k, hits_at_k(&preds, &answers, k, mode)?);
    }
    let mrr_value = mrr(&preds, &answers, mode)?;
    let em = exact_match(&preds, &answers, mode)?;

    let mut pairs = Vec::with_capacity(preds.len());
    for p in &preds {
        let r = by_id[p.example_id.as_str()];
        let (Some(slot), Some(g)) = (r.mask_target.slot(), gold_triple(r)) else {
            pairs.clear();
            break;
        };
        let mut predicted = g.clone();
        let top = p.candidates[0].text.clone();
        match slot {
            Slot::Head => predicted.head = top,
            Slot::Relation => predicted.relation = top,
            Slot::Tail => predicted.tail = top,
        }
        pairs.push((predicted, g));
    }
    let aed_value = if pairs.is_empty() {
        None
    } else {
        let (p, g): (Vec<Triple>, Vec<Triple>) = pairs.into_iter().unzip();
        Some(aed(&p, &g, cfg.aed_chunks)?)
    };

    Ok(MetricReport {
        hits,
        mrr: mrr_value,
        exact_match_pct: em,
        aed: aed_value,
        n_examples: preds.len(),
        normalization: mode,
        aed_chunks: cfg.aed_chunks,
    })
}

/// Read a prediction file and an eval prompt file and score them.
pub fn evaluate(pred_path: &Path, gold_path: &Path, cfg: &MetricConfig) -> Result<MetricReport> {
    let preds = read_predictions(pred_path)?;
    let gold = read_prompts(gold_path)?;
    evaluate_records(&preds, &gold, cfg)
}

impl MetricReport {
    /// `metric<TAB>value` lines under a schema header, 3 decimals.
    pub fn to_report_file(&self) -> String {
        let mut out = format!("#schema={REPORT_SCHEMA}\nn_examples\t{}\n", self.n_examples);
        for (k, v) in &self.hits {
            out.push_str(&format!("hits@{k}\t{v:.3}\n"));
        }
        out.push_str(&format!("mrr\t{:.3}\n", self.mrr));
        out.push_str(&format!("exact_match_pct\t{:.3}\n", self.exact_match_pct));
        if let Some(a) = self.aed {
            out.push_str(&format!("aed\t{a:.3}\n"));
        }
        out.push_str(&format!("normalization\t{}\n", self.normalization.as_str()));
        out.push_str(&format!("aed_chunks\t{}\n", self.aed_chunks));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_report_file()).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut cols: Vec<(String, String)> = self
            .hits
            .iter()
            .map(|(k, v)| (format!("Hits@{k}"), format!("{v:.3}")))
            .collect();
        if let Some(a) = self.aed {
            cols.push(("AED".into(), format!("{a:.3}")));
        }
        cols.push(("MRR".into(), format!("{:.3}", self.mrr)));
        cols.push(("EM (%)".into(), format!("{:.3}", self.exact_match_pct)));
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let row = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(f, "{}", row(cols.iter().map(|(h, _)| h.as_str()).collect()))?;
        writeln!(f, "{}", row(cols.iter().map(|(_, v)| v.as_str()).collect()))?;
        write!(
            f,
            "n={} normalization={} aed_chunks={}",
            self.n_examples,
            self.normalization.as_str(),
            self.aed_chunks
        )
    }
}
