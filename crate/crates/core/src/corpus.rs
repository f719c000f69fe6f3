//! Corpus loading and sentence/paragraph segmentation.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: Option<String>,
    pub body: String,
    pub source_path: String,
}

/// `(doc_id, para_idx, sent_idx)`; the identity of a [`SentenceUnit`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitKey {
    pub doc_id: String,
    pub para_idx: u32,
    pub sent_idx: u32,
}

impl fmt::Display for UnitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}.{}", self.doc_id, self.para_idx, self.sent_idx)
    }
}

/// One segmented sentence of a document; the retrieval atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceUnit {
    pub doc_id: String,
    pub para_idx: u32,
    pub sent_idx: u32,
    pub text: String,
    pub norm_tokens: Vec<String>,
    /// Byte offsets into the owning document's body.
    pub char_span: (usize, usize),
}

impl SentenceUnit {
    pub fn key(&self) -> UnitKey {
        UnitKey {
            doc_id: self.doc_id.clone(),
            para_idx: self.para_idx,
            sent_idx: self.sent_idx,
        }
    }

    pub(crate) fn key_ref(&self) -> (&str, u32, u32) {
        (&self.doc_id, self.para_idx, self.sent_idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// Directory of UTF-8 `.txt` files.
    PlainDir,
    /// `head<TAB>relation<TAB>tail<TAB>sentence` lines.
    AlignedTriples,
    /// JSON lines with `id`, `title` and `text`.
    JsonlDocs,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain_dir" => Ok(Self::PlainDir),
            "aligned_triples" => Ok(Self::AlignedTriples),
            "jsonl_docs" => Ok(Self::JsonlDocs),
            other => Err(Error::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

pub type DocumentStream = Box<dyn Iterator<Item = Result<Document>> + Send>;

/// Stream the documents of a corpus.
///
/// Document identifiers depend only on the file path and the record
/// position: `f<n>` for the n-th `.txt` file of a directory (byte order of
/// file names), `<stem>:<n>` for the n-th record of a line-oriented file.
/// A `jsonl_docs` record that carries a non-empty `id` keeps it.
pub fn documents(path: &Path, format: CorpusFormat) -> Result<DocumentStream> {
    match format {
        CorpusFormat::PlainDir => plain_dir(path),
        CorpusFormat::AlignedTriples | CorpusFormat::JsonlDocs => {
            let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let path = path.to_path_buf();
            let stem = file_stem(&path);
            let records: Vec<(usize, String)> = content
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| (i + 1, l.to_owned()))
                .collect();
            let iter = records
                .into_iter()
                .enumerate()
                .map(move |(ordinal, (line_no, line))| match format {
                    CorpusFormat::AlignedTriples => {
                        aligned_record(&path, &stem, ordinal, line_no, &line)
                    }
                    _ => jsonl_record(&path, &stem, ordinal, line_no, &line),
                })
                .filter(|r| !matches!(r, Ok(None)))
                .map(|r| r.map(|d| d.expect("filtered")));
            Ok(Box::new(iter))
        }
    }
}

/// Load a whole corpus, rejecting duplicate document identifiers.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for doc in documents(path, format)? {
        let doc = doc?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocument(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub(crate) fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn plain_dir(dir: &Path) -> Result<DocumentStream> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    files.sort();
    let iter = files.into_iter().enumerate().filter_map(|(i, p)| {
        let body = match fs::read_to_string(&p) {
            Ok(b) => b,
            Err(e) => return Some(Err(Error::io(p, e))),
        };
        if body.trim().is_empty() {
            return None;
        }
        Some(Ok(Document {
            doc_id: format!("f{i}"),
            title: None,
            body,
            source_path: p.to_string_lossy().into_owned(),
        }))
    });
    Ok(Box::new(iter))
}

fn aligned_record(
    path: &Path,
    stem: &str,
    ordinal: usize,
    line_no: usize,
    line: &str,
) -> Result<Option<Document>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(Error::parse(
            path,
            line_no,
            format!("expected 4 tab-separated fields, found {}", fields.len()),
        ));
    }
    let sentence = fields[3].trim();
    if sentence.is_empty() {
        return Err(Error::parse(path, line_no, "empty aligned sentence"));
    }
    Ok(Some(Document {
        doc_id: format!("{stem}:{ordinal}"),
        title: None,
        body: sentence.to_owned(),
        source_path: path.to_string_lossy().into_owned(),
    }))
}

#[derive(Deserialize)]
struct JsonDoc {
    #[serde(default)]
    id: Option<serde_json::Value>,
    #[serde(default)]
    title: Option<String>,
    text: String,
}

fn jsonl_record(
    path: &Path,
    stem: &str,
    ordinal: usize,
    line_no: usize,
    line: &str,
) -> Result<Option<Document>> {
    let rec: JsonDoc =
        serde_json::from_str(line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
    if rec.text.trim().is_empty() {
        return Ok(None);
    }
    let doc_id = match rec.id {
        Some(serde_json::Value::String(s)) if !s.is_empty() => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => format!("{stem}:{ordinal}"),
    };
    Ok(Some(Document {
        doc_id,
        title: rec.title,
        body: rec.text,
        source_path: path.to_string_lossy().into_owned(),
    }))
}

/// Rule-based sentence segmenter.
///
/// Paragraphs end at blank lines. A sentence ends at a run of `.`, `!` or
/// `?` (optionally followed by closing quotes or brackets) when the next
/// non-space character is uppercase or the paragraph ends. A period directly
/// after a word on the abbreviation list never ends a sentence.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: HashSet<String>,
}

pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e", "inc", "ltd",
    "co", "corp", "no", "gen", "col", "lt", "sgt", "capt", "sen", "rep", "gov", "pres", "mt", "ft",
    "u.s", "u.k", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov",
    "dec", "approx", "dept", "fig", "vol", "al",
];

impl Default for Segmenter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl Segmenter {
    /// Abbreviations are matched case-insensitively, without the final period.
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim_end_matches('.').to_lowercase())
                .collect(),
        }
    }

    pub fn segment(&self, doc: &Document) -> Vec<SentenceUnit> {
        let mut units = Vec::new();
        for (para_idx, (p_start, p_end)) in paragraphs(&doc.body).into_iter().enumerate() {
            let mut sent_idx = 0;
            for (s, e) in self.sentences(&doc.body, p_start, p_end) {
                let text = &doc.body[s..e];
                let norm_tokens = text::normalize(text);
                if norm_tokens.is_empty() {
                    continue;
                }
                units.push(SentenceUnit {
                    doc_id: doc.doc_id.clone(),
                    para_idx: para_idx as u32,
                    sent_idx,
                    text: text.to_owned(),
                    norm_tokens,
                    char_span: (s, e),
                });
                sent_idx += 1;
            }
        }
        units
    }

    /// Sentence byte ranges (trimmed, non-empty) within `body[start..end]`.
    fn sentences(&self, body: &str, start: usize, end: usize) -> Vec<(usize, usize)> {
        let para = &body[start..end];
        let chars: Vec<(usize, char)> = para.char_indices().collect();
        let mut out = Vec::new();
        let mut sent_start = 0usize;
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                j += 1;
            }
            while j < chars.len() && matches!(chars[j].1, '"' | '\'' | ')' | ']' | '”' | '’') {
                j += 1;
            }
            let boundary_end = chars.get(j).map_or(para.len(), |&(p, _)| p);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let at_end = k == chars.len();
            let followed_ok = k > j && chars.get(k).is_some_and(|&(_, n)| n.is_uppercase());
            if (at_end || followed_ok) && !(c == '.' && self.is_abbreviation(&para[..pos])) {
                push_trimmed(&mut out, para, sent_start, boundary_end, start);
                sent_start = boundary_end;
            }
            i = j.max(i + 1);
        }
        push_trimmed(&mut out, para, sent_start, para.len(), start);
        out
    }

    fn is_abbreviation(&self, before: &str) -> bool {
        let word = before
            .rsplit(|c: char| c.is_whitespace() || matches!(c, '(' | '"' | '\'' | '['))
            .next()
            .unwrap_or("");
        !word.is_empty() && self.abbreviations.contains(&word.to_lowercase())
    }
}

fn push_trimmed(out: &mut Vec<(usize, usize)>, para: &str, s: usize, e: usize, offset: usize) {
    let slice = &para[s..e];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        let a = offset + s + lead;
        out.push((a, a + trimmed.len()));
    }
}

/// Paragraph byte ranges; a line holding only whitespace separates paragraphs.
fn paragraphs(body: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut para_start: Option<usize> = None;
    let mut para_end = 0;
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        let blank = line.trim().is_empty();
        if blank {
            if let Some(s) = para_start.take() {
                out.push((s, para_end));
            }
        } else {
            if para_start.is_none() {
                para_start = Some(offset);
            }
            para_end = offset + line.len();
        }
        offset += line.len();
    }
    if let Some(s) = para_start {
        out.push((s, para_end));
    }
    out
}

/// Segment with the default abbreviation list.
pub fn segment(doc: &Document) -> Vec<SentenceUnit> {
    Segmenter::default().segment(doc)
}

/// Segment many documents in parallel; output ordered by `doc_id`, then position.
pub fn segment_all(docs: &[Document], segmenter: &Segmenter) -> Vec<SentenceUnit> {
    let mut per_doc: Vec<(&str, Vec<SentenceUnit>)> = docs
        .par_iter()
        .map(|d| (d.doc_id.as_str(), segmenter.segment(d)))
        .collect();
    per_doc.sort_by(|a, b| a.0.cmp(b.0));
    per_doc.into_iter().flat_map(|(_, u)| u).collect()
}

/// One unit per document, text kept verbatim. Aligned-triple records are
/// already single sentences and are not re-segmented.
pub fn verbatim_units(docs: &[Document]) -> Vec<SentenceUnit> {
    let mut units: Vec<SentenceUnit> = docs
        .iter()
        .filter_map(|d| {
            let norm_tokens = text::normalize(&d.body);
            (!norm_tokens.is_empty()).then(|| SentenceUnit {
                doc_id: d.doc_id.clone(),
                para_idx: 0,
                sent_idx: 0,
                text: d.body.clone(),
                norm_tokens,
                char_span: (0, d.body.len()),
            })
        })
        .collect();
    units.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    units
}

/// Units for a loaded corpus: verbatim for aligned triples, segmented
/// otherwise.
pub fn corpus_units(
    docs: &[Document],
    format: CorpusFormat,
    segmenter: &Segmenter,
) -> Vec<SentenceUnit> {
    match format {
        CorpusFormat::AlignedTriples => verbatim_units(docs),
        CorpusFormat::PlainDir | CorpusFormat::JsonlDocs => segment_all(docs, segmenter),
    }
}
