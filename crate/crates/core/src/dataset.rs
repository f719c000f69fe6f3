//! Dataset readers, the train/eval split, and the pipeline's record files.
//!
//! Record files are UTF-8, one JSON object per line, preceded by a header
//! line `#schema=<name>/<version>`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::file_stem;
use crate::error::{Error, Result};
use crate::metrics::{normalize_answer, Normalization};
use crate::prompt::{PromptRecord, Triple};

pub const PROMPTS_SCHEMA: &str = "prompts/1";
pub const PREDICTIONS_SCHEMA: &str = "predictions/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleFormat {
    Tsv3,
    Tsv4Aligned,
    TacredJson,
}

impl FromStr for TripleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv3" => Ok(Self::Tsv3),
            "tsv4_aligned" => Ok(Self::Tsv4Aligned),
            "tacred_json" => Ok(Self::TacredJson),
            other => Err(Error::Config(format!("unknown triple format `{other}`"))),
        }
    }
}

/// Read triples; example ids are `<file stem>:<record ordinal>`.
pub fn read_triples(path: &Path, format: TripleFormat) -> Result<Vec<Triple>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = file_stem(path);
    match format {
        TripleFormat::Tsv3 | TripleFormat::Tsv4Aligned => {
            let want = if format == TripleFormat::Tsv3 { 3 } else { 4 };
            data_lines(&content)
                .enumerate()
                .map(|(ordinal, (line_no, line))| {
                    let f: Vec<&str> = line.split('\t').map(str::trim).collect();
                    if f.len() != want {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("expected {want} tab-separated fields, found {}", f.len()),
                        ));
                    }
                    if f[..3].iter().any(|s| s.is_empty()) {
                        return Err(Error::parse(path, line_no, "empty triple slot"));
                    }
                    Ok(Triple {
                        head: f[0].into(),
                        relation: f[1].into(),
                        tail: f[2].into(),
                        aligned_sentence: f.get(3).map(|s| (*s).to_owned()),
                        example_id: format!("{stem}:{ordinal}"),
                    })
                })
                .collect()
        }
        TripleFormat::TacredJson => read_tacred(path, &stem, &content),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn data_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}

#[derive(Deserialize)]
struct TacredRecord {
    token: Vec<String>,
    relation: String,
    subj_start: usize,
    subj_end: usize,
    obj_start: usize,
    obj_end: usize,
}

fn tacred_span(tokens: &[String], start: usize, end: usize) -> Option<String> {
    (start <= end && end < tokens.len()).then(|| tokens[start..=end].join(" "))
}

/// TACRED-style records, either a JSON array or JSON lines. Records labelled
/// `no_relation` carry no known relation and are dropped; ordinals still
/// count them so ids stay stable.
fn read_tacred(path: &Path, stem: &str, content: &str) -> Result<Vec<Triple>> {
    let records: Vec<(usize, TacredRecord)> = if content.trim_start().starts_with('[') {
        let values: Vec<TacredRecord> = serde_json::from_str(content)
            .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        values.into_iter().map(|r| (0, r)).collect()
    } else {
        data_lines(content)
            .map(|(line_no, line)| {
                serde_json::from_str(line)
                    .map(|r| (line_no, r))
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))
            })
            .collect::<Result<_>>()?
    };
    let mut out = Vec::new();
    for (ordinal, (line_no, r)) in records.into_iter().enumerate() {
        if r.relation == "no_relation" || r.relation.is_empty() {
            continue;
        }
        let bad = || {
            Error::parse(
                path,
                line_no,
                format!("record {ordinal}: entity span out of range"),
            )
        };
        out.push(Triple {
            head: tacred_span(&r.token, r.subj_start, r.subj_end).ok_or_else(bad)?,
            relation: r.relation,
            tail: tacred_span(&r.token, r.obj_start, r.obj_end).ok_or_else(bad)?,
            aligned_sentence: Some(r.token.join(" ")),
            example_id: format!("{stem}:{ordinal}"),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub example_id: String,
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaFormat {
    /// `question<TAB>answer`
    QaTsv,
    /// `{"question": ..., "answer": ...}`
    QaJsonl,
}

pub fn read_qa(path: &Path, format: QaFormat) -> Result<Vec<QaItem>> {
    #[derive(Deserialize)]
    struct Rec {
        question: String,
        answer: String,
    }
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = file_stem(path);
    data_lines(&content)
        .enumerate()
        .map(|(ordinal, (line_no, line))| {
            let (question, answer) = match format {
                QaFormat::QaTsv => {
                    let (q, a) = line.split_once('\t').ok_or_else(|| {
                        Error::parse(path, line_no, "expected question<TAB>answer")
                    })?;
                    (q.trim().to_owned(), a.trim().to_owned())
                }
                QaFormat::QaJsonl => {
                    let r: Rec = serde_json::from_str(line)
                        .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                    (r.question, r.answer)
                }
            };
            if question.trim().is_empty() || answer.trim().is_empty() {
                return Err(Error::parse(path, line_no, "empty question or answer"));
            }
            Ok(QaItem {
                example_id: format!("{stem}:{ordinal}"),
                question,
                answer,
            })
        })
        .collect()
}

/// A rational in (0, 1), written `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::Config(format!(
                "train fraction {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        Ok(Self { num, den })
    }

    /// `floor(n * self)`, exact.
    pub fn floor_of(self, n: usize) -> usize {
        ((n as u128 * self.num as u128) / self.den as u128) as usize
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("`{s}` is not a fraction like 9/10"));
        let (n, d) = s.split_once('/').ok_or_else(bad)?;
        Fraction::new(
            n.trim().parse().map_err(|_| bad())?,
            d.trim().parse().map_err(|_| bad())?,
        )
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    Random,
    /// All triples sharing a head land on the same side.
    ByHeadEntity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: Fraction,
    pub seed: u64,
    pub strategy: SplitStrategy,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: Fraction { num: 9, den: 10 },
            seed: 0,
            strategy: SplitStrategy::Random,
        }
    }
}

/// Items that carry a grouping key for [`SplitStrategy::ByHeadEntity`].
pub trait SplitKey {
    fn split_key(&self) -> &str;
}

impl SplitKey for Triple {
    fn split_key(&self) -> &str {
        &self.head
    }
}

impl SplitKey for QaItem {
    fn split_key(&self) -> &str {
        &self.example_id
    }
}

/// Partition `items` into `(train, eval)`; each side keeps input order.
///
/// `Random` gives train exactly `floor(N * train_fraction)` items. With
/// `ByHeadEntity`, shuffled head groups are added to train whenever they fit
/// under that target, so train may come out smaller when groups are uneven.
pub fn split<T: Clone + SplitKey>(items: &[T], spec: &SplitSpec) -> (Vec<T>, Vec<T>) {
    let target = spec.train_fraction.floor_of(items.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_train = vec![false; items.len()];
    match spec.strategy {
        SplitStrategy::Random => {
            let mut order: Vec<usize> = (0..items.len()).collect();
            order.shuffle(&mut rng);
            for &i in &order[..target] {
                in_train[i] = true;
            }
        }
        SplitStrategy::ByHeadEntity => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, it) in items.iter().enumerate() {
                groups.entry(it.split_key()).or_default().push(i);
            }
            let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
            groups.shuffle(&mut rng);
            let mut filled = 0;
            for g in groups {
                if filled + g.len() <= target {
                    filled += g.len();
                    for i in g {
                        in_train[i] = true;
                    }
                }
            }
        }
    }
    let mut train = Vec::with_capacity(target);
    let mut eval = Vec::with_capacity(items.len() - target);
    for (it, t) in items.iter().zip(in_train) {
        if t {
            train.push(it.clone());
        } else {
            eval.push(it.clone());
        }
    }
    (train, eval)
}

fn read_header(path: &Path, first: Option<&str>, schema: &str) -> Result<bool> {
    let Some(line) = first.filter(|l| l.starts_with("#schema=")) else {
        return Ok(false);
    };
    let found = &line["#schema=".len()..];
    if found == schema {
        Ok(true)
    } else {
        Err(Error::parse(
            path,
            1,
            format!("expected schema {schema}, found {found}"),
        ))
    }
}

/// Parse a record file; a leading `#schema=` header, when present, must
/// match `schema`.
fn read_records<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<(usize, T)>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let has_header = read_header(path, content.lines().next(), schema)?;
    data_lines(&content)
        .skip(usize::from(has_header))
        .map(|(line_no, line)| {
            serde_json::from_str(line)
                .map(|r| (line_no, r))
                .map_err(|e| Error::parse(path, line_no, e.to_string()))
        })
        .collect()
}

fn write_records<T: Serialize>(path: &Path, schema: &str, records: &[&T]) -> Result<()> {
    let mut out = format!("#schema={schema}\n");
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write prompt records sorted by `example_id`.
pub fn emit_prompts(records: &[PromptRecord], path: &Path) -> Result<()> {
    let mut sorted: Vec<&PromptRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.example_id.cmp(&b.example_id));
    if let Some(w) = sorted
        .windows(2)
        .find(|w| w[0].example_id == w[1].example_id)
    {
        return Err(Error::DuplicateExample(w[0].example_id.clone()));
    }
    write_records(path, PROMPTS_SCHEMA, &sorted)
}

pub fn read_prompts(path: &Path) -> Result<Vec<PromptRecord>> {
    let records: Vec<(usize, PromptRecord)> = read_records(path, PROMPTS_SCHEMA)?;
    let mut seen = HashSet::new();
    records
        .into_iter()
        .map(|(line_no, r)| {
            if r.target_text.is_empty() {
                return Err(Error::parse(path, line_no, "empty target_text"));
            }
            if !seen.insert(r.example_id.clone()) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("duplicate example_id {}", r.example_id),
                ));
            }
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

/// A ranked candidate list for one example, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub example_id: String,
    pub candidates: Vec<Candidate>,
}

impl PredictionRecord {
    /// Non-empty, scores non-increasing, texts distinct after strict normalization.
    pub fn validate(&self) -> Result<()> {
        let id = &self.example_id;
        if self.candidates.is_empty() {
            return Err(Error::Validation(format!("{id}: no candidates")));
        }
        if self.candidates.iter().any(|c| c.score.is_nan()) {
            return Err(Error::Validation(format!("{id}: NaN score")));
        }
        if self.candidates.windows(2).any(|w| w[0].score < w[1].score) {
            return Err(Error::Validation(format!(
                "{id}: scores are not non-increasing"
            )));
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if !seen.insert(normalize_answer(&c.text, Normalization::Strict)) {
                return Err(Error::Validation(format!(
                    "{id}: candidate {:?} repeats after normalization",
                    c.text
                )));
            }
        }
        Ok(())
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let records: Vec<(usize, PredictionRecord)> = read_records(path, PREDICTIONS_SCHEMA)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    records
        .into_iter()
        .map(|(line_no, r)| {
            r.validate()
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            if let Some(prev) = seen.insert(r.example_id.clone(), line_no) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!(
                        "duplicate example_id {} (first on line {prev})",
                        r.example_id
                    ),
                ));
            }
            Ok(r)
        })
        .collect()
}

/// Write predictions sorted by `example_id`, validating each record.
pub fn write_predictions(records: &[PredictionRecord], path: &Path) -> Result<()> {
    let mut sorted: Vec<&PredictionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.example_id.cmp(&b.example_id));
    if let Some(w) = sorted
        .windows(2)
        .find(|w| w[0].example_id == w[1].example_id)
    {
        return Err(Error::DuplicateExample(w[0].example_id.clone()));
    }
    for r in &sorted {
        r.validate()?;
    }
    write_records(path, PREDICTIONS_SCHEMA, &sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{MaskTarget, Task};
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn tsv_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "kelm.tsv",
            "Barack Obama\tspouse\tMichelle Obama\n",
        );
        let t = read_triples(&p, TripleFormat::Tsv3).unwrap();
        assert_eq!(
            t,
            [Triple::new(
                "kelm:0",
                "Barack Obama",
                "spouse",
                "Michelle Obama"
            )]
        );

        let p = write(dir.path(), "al.tsv", "A\tr\tB\tA r B.\n\nC\tr\tD\tC r D.\n");
        let t = read_triples(&p, TripleFormat::Tsv4Aligned).unwrap();
        assert_eq!(t[1].aligned_sentence.as_deref(), Some("C r D."));
        assert_eq!(t[1].example_id, "al:1");

        let p = write(dir.path(), "bad.tsv", "A\tr\tB\nA\tr\n");
        match read_triples(&p, TripleFormat::Tsv3) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            "tsv9".parse::<TripleFormat>(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tacred_drops_unknown_relations() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"[
 {"id":"a","token":["Bill","Gates","founded","Microsoft","."],"relation":"org:founded_by","subj_start":3,"subj_end":3,"obj_start":0,"obj_end":1},
 {"id":"b","token":["He","ate","."],"relation":"no_relation","subj_start":0,"subj_end":0,"obj_start":1,"obj_end":1},
 {"id":"c","token":["Ann","in","Rome"],"relation":"per:city","subj_start":0,"subj_end":0,"obj_start":2,"obj_end":2}
]"#;
        let p = write(dir.path(), "tacred.json", body);
        let t = read_triples(&p, TripleFormat::TacredJson).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].head, "Microsoft");
        assert_eq!(t[0].tail, "Bill Gates");
        assert_eq!(t[1].example_id, "tacred:2");

        let p = write(
            dir.path(),
            "t2.jsonl",
            "{\"token\":[\"a\"],\"relation\":\"r\",\"subj_start\":0,\"subj_end\":0,\"obj_start\":0,\"obj_end\":0}\n{oops\n",
        );
        assert!(matches!(
            read_triples(&p, TripleFormat::TacredJson),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn qa_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "tqa.tsv",
            "Who is Michelle Obama's husband?\tBarack Obama\n",
        );
        let q = read_qa(&p, QaFormat::QaTsv).unwrap();
        assert_eq!(q[0].answer, "Barack Obama");
        let p = write(
            dir.path(),
            "tqa.jsonl",
            "{\"question\":\"Q?\",\"answer\":\"A\"}\n",
        );
        assert_eq!(
            read_qa(&p, QaFormat::QaJsonl).unwrap()[0].example_id,
            "tqa:0"
        );
    }

    fn items(n: usize) -> Vec<Triple> {
        (0..n)
            .map(|i| {
                Triple::new(
                    &format!("t:{i}"),
                    &format!("h{}", i % 10),
                    "r",
                    &format!("x{i}"),
                )
            })
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let data = items(1000);
        let spec = SplitSpec::default();
        let (tr, ev) = split(&data, &spec);
        assert_eq!((tr.len(), ev.len()), (900, 100));
        assert_eq!(split(&data, &spec), (tr.clone(), ev.clone()));
        let other = split(&data, &SplitSpec { seed: 1, ..spec });
        assert_ne!(other.0, tr);
    }

    #[test]
    fn split_by_head_keeps_groups_together() {
        let data = items(100);
        let spec = SplitSpec {
            strategy: SplitStrategy::ByHeadEntity,
            ..Default::default()
        };
        let (tr, ev) = split(&data, &spec);
        let heads_tr: HashSet<_> = tr.iter().map(|t| &t.head).collect();
        let heads_ev: HashSet<_> = ev.iter().map(|t| &t.head).collect();
        assert!(heads_tr.is_disjoint(&heads_ev));
        assert_eq!((tr.len(), ev.len()), (90, 10));
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!("9/10".parse::<Fraction>().unwrap().floor_of(18_000), 16_200);
        assert!("10/10".parse::<Fraction>().is_err());
        assert!("0/3".parse::<Fraction>().is_err());
        assert!("0.9".parse::<Fraction>().is_err());
    }

    fn record(id: &str, input: &str) -> PromptRecord {
        PromptRecord {
            example_id: id.into(),
            input_text: input.into(),
            target_text: "t".into(),
            mask_target: MaskTarget::Tail,
            context_attached: false,
            task: Task::TailPred,
            meta: BTreeMap::from([("seed".to_string(), "1".to_string())]),
        }
    }

    #[test]
    fn prompts_escape_newlines_and_sort() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out/train.jsonl");
        let recs = vec![record("b", "line one\nline two"), record("a", "plain")];
        emit_prompts(&recs, &p).unwrap();
        let raw = fs::read_to_string(&p).unwrap();
        assert_eq!(raw.lines().count(), 3);
        assert!(raw.starts_with("#schema=prompts/1\n"));
        let back = read_prompts(&p).unwrap();
        assert_eq!(back[0].example_id, "a");
        assert_eq!(back[1].input_text, "line one\nline two");

        let dup = vec![record("a", "x"), record("a", "y")];
        assert!(matches!(
            emit_prompts(&dup, &p),
            Err(Error::DuplicateExample(_))
        ));
    }

    #[test]
    fn prompts_missing_field_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "p.jsonl",
            "#schema=prompts/1\n{\"example_id\":\"a\",\"input_text\":\"x\",\"target_text\":\"t\",\"mask_target\":\"tail\",\"context_attached\":false,\"task\":\"tail_pred\",\"meta\":{}}\n{\"example_id\":\"b\",\"input_text\":\"x\"}\n",
        );
        match read_prompts(&p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("missing field"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let p = write(dir.path(), "v.jsonl", "#schema=prompts/2\n");
        assert!(matches!(
            read_prompts(&p),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn prediction_validation() {
        let dir = tempfile::tempdir().unwrap();
        let ok = write(
            dir.path(),
            "ok.jsonl",
            "{\"example_id\":\"a\",\"candidates\":[{\"text\":\"x\",\"score\":0.9},{\"text\":\"y\",\"score\":0.2}]}\n",
        );
        assert_eq!(read_predictions(&ok).unwrap()[0].candidates.len(), 2);

        let inc = write(
            dir.path(),
            "inc.jsonl",
            "{\"example_id\":\"a\",\"candidates\":[{\"text\":\"x\",\"score\":0.2},{\"text\":\"y\",\"score\":0.9}]}\n",
        );
        assert!(matches!(
            read_predictions(&inc),
            Err(Error::Parse { line: 1, .. })
        ));

        let dup_text = write(
            dir.path(),
            "dt.jsonl",
            "{\"example_id\":\"a\",\"candidates\":[{\"text\":\"Paris\",\"score\":0.9},{\"text\":\" paris \",\"score\":0.2}]}\n",
        );
        assert!(read_predictions(&dup_text).is_err());

        let dup_id = write(
            dir.path(),
            "di.jsonl",
            "{\"example_id\":\"a\",\"candidates\":[{\"text\":\"x\",\"score\":1}]}\n{\"example_id\":\"a\",\"candidates\":[{\"text\":\"x\",\"score\":1}]}\n",
        );
        assert!(matches!(
            read_predictions(&dup_id),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn split_partition_laws(n in 2usize..400, seed in any::<u64>(), by_head in any::<bool>()) {
            let data = items(n);
            let spec = SplitSpec {
                seed,
                strategy: if by_head { SplitStrategy::ByHeadEntity } else { SplitStrategy::Random },
                ..Default::default()
            };
            let (tr, ev) = split(&data, &spec);
            let ids_tr: HashSet<_> = tr.iter().map(|t| t.example_id.clone()).collect();
            let ids_ev: HashSet<_> = ev.iter().map(|t| t.example_id.clone()).collect();
            prop_assert!(ids_tr.is_disjoint(&ids_ev));
            prop_assert_eq!(ids_tr.len() + ids_ev.len(), n);
            if by_head {
                prop_assert!(tr.len() <= n * 9 / 10);
            } else {
                prop_assert_eq!(tr.len(), n * 9 / 10);
            }
            prop_assert_eq!(split(&data, &spec), (tr, ev));
        }

        #[test]
        fn prompt_files_round_trip(
            recs in proptest::collection::btree_map("[a-z0-9:]{1,8}", ("\\PC{0,30}", "[^\\x00]{1,10}"), 0..20)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("r.jsonl");
            let records: Vec<PromptRecord> = recs
                .into_iter()
                .map(|(id, (input, target))| PromptRecord { target_text: target, ..record(&id, &input) })
                .collect();
            emit_prompts(&records, &p).unwrap();
            prop_assert_eq!(read_prompts(&p).unwrap(), records);
        }
    }
}
