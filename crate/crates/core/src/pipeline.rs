//! Config-driven pipeline stages: `index`, `build`, `evaluate`, `inspect`.
//!
//! A run is described by one TOML file. Relative paths resolve against the
//! directory holding that file. Each stage writes a JSON run manifest into
//! `paths.manifest_dir`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{corpus_units, load_corpus, CorpusFormat, Segmenter};
use crate::dataset::{
    emit_prompts, read_qa, read_triples, split, QaFormat, SplitSpec, TripleFormat,
};
use crate::error::{Error, Result};
use crate::index::{load_index, save_index, EntityIndex, IndexBuilder, DEFAULT_MAX_NGRAM};
use crate::metrics::{evaluate, MetricConfig, MetricReport};
use crate::prompt::{
    build_qa_prompt, build_triple_prompt, scan_leakage, select_mask_with, MaskPolicy, Mode,
    PromptRecord, PromptTemplate, Slot, Task, Triple,
};
use crate::retrieval::{retrieve, RetrievalConfig};

/// Overrides the directory used for an index whose `path` is not configured.
pub const CACHE_DIR_ENV: &str = "KINFUSE_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    pub format: CorpusFormat,
    /// Replaces the built-in abbreviation list of the segmenter.
    #[serde(default)]
    pub abbreviations: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub vocab_path: Option<PathBuf>,
    #[serde(default = "default_max_ngram")]
    pub max_ngram: usize,
}

fn default_max_ngram() -> usize {
    DEFAULT_MAX_NGRAM
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            path: None,
            vocab_path: None,
            max_ngram: DEFAULT_MAX_NGRAM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Tsv3,
    Tsv4Aligned,
    TacredJson,
    QaTsv,
    QaJsonl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: DatasetFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSetting {
    Random,
    Head,
    Relation,
    Tail,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptsConfig {
    /// Defaults to `triple-v1`, or `qa-v1` for the QA task.
    #[serde(default)]
    pub template_id: Option<String>,
    /// TOML file with `[[template]]` tables, searched before the built-ins.
    #[serde(default)]
    pub templates_path: Option<PathBuf>,
    pub task: Task,
    /// Defaults to the slot named by `task`.
    #[serde(default)]
    pub mask: Option<MaskSetting>,
    #[serde(default)]
    pub seed: u64,
    /// Also retrieve context for the unmasked relation string.
    #[serde(default = "yes")]
    pub retrieve_relation: bool,
}

fn yes() -> bool {
    true
}

impl PromptsConfig {
    fn mask_policy(&self) -> Result<Option<MaskPolicy>> {
        let setting = self.mask.unwrap_or(match self.task {
            Task::TailPred => MaskSetting::Tail,
            Task::HeadPred => MaskSetting::Head,
            Task::RelationPred => MaskSetting::Relation,
            Task::Qa => MaskSetting::None,
        });
        match (self.task, setting) {
            (Task::Qa, MaskSetting::None) => Ok(None),
            (Task::Qa, _) | (_, MaskSetting::None) => Err(Error::Config(
                "mask = \"none\" goes with task = \"qa\" and only with it".into(),
            )),
            (_, MaskSetting::Random) => Ok(Some(MaskPolicy::Random)),
            (_, MaskSetting::Head) => Ok(Some(MaskPolicy::Head)),
            (_, MaskSetting::Relation) => Ok(Some(MaskPolicy::Relation)),
            (_, MaskSetting::Tail) => Ok(Some(MaskPolicy::Tail)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub train_out: PathBuf,
    pub eval_out: PathBuf,
    #[serde(default)]
    pub predictions_in: Option<PathBuf>,
    #[serde(default)]
    pub report_out: Option<PathBuf>,
    #[serde(default = "default_manifest_dir")]
    pub manifest_dir: PathBuf,
}

fn default_manifest_dir() -> PathBuf {
    PathBuf::from("manifests")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub index: IndexConfig,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    pub prompts: PromptsConfig,
    #[serde(default)]
    pub split: SplitSpec,
    pub paths: PathsConfig,
    #[serde(default)]
    pub metrics: MetricConfig,
}

/// Apply `key.path=value` to a TOML tree. The value is read as a TOML
/// literal when it parses as one, else as a bare string.
fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in parents {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// A loaded config with its base directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl Run {
    pub fn from_toml(text: &str, base_dir: &Path, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.retrieval.validate()?;
        config.metrics.validate()?;
        config.prompts.mask_policy()?;
        Ok(Self {
            config,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base, overrides)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// SHA-256 of the effective config (after overrides).
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(&self.config).expect("config serializes"),
        ))
    }

    pub fn index_dir(&self) -> PathBuf {
        match &self.config.index.path {
            Some(p) => self.resolve(p),
            None => match std::env::var_os(CACHE_DIR_ENV) {
                Some(dir) => PathBuf::from(dir)
                    .join(&self.config_hash()[..16])
                    .join("index"),
                None => self.base_dir.join(".kinfuse-cache").join("index"),
            },
        }
    }

    fn template(&self) -> Result<PromptTemplate> {
        let p = &self.config.prompts;
        let id = p.template_id.clone().unwrap_or_else(|| {
            if p.task == Task::Qa {
                "qa-v1"
            } else {
                "triple-v1"
            }
            .to_owned()
        });
        if let Some(file) = &p.templates_path {
            #[derive(Deserialize)]
            struct Templates {
                template: Vec<PromptTemplate>,
            }
            let file = self.resolve(file);
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let t: Templates = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if let Some(found) = t.template.into_iter().find(|t| t.template_id == id) {
                found.validate()?;
                return Ok(found);
            }
        }
        PromptTemplate::builtin(&id)
            .ok_or_else(|| Error::Config(format!("unknown template `{id}`")))
    }
}

/// Provenance record written by every stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, usize>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// SHA-256 of a file, or of every file under a directory (sorted, with
/// relative names mixed in).
pub fn digest_path(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(fs::read(&f).map_err(|e| Error::io(&f, e))?);
        }
    } else {
        h.update(fs::read(path).map_err(|e| Error::io(path, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

struct ManifestBuilder<'a> {
    run: &'a Run,
    m: RunManifest,
}

impl<'a> ManifestBuilder<'a> {
    fn new(run: &'a Run, stage: &str) -> Self {
        Self {
            run,
            m: RunManifest {
                stage: stage.into(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                config_hash: run.config_hash(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                counts: BTreeMap::new(),
                started_unix: now(),
                finished_unix: 0,
            },
        }
    }

    fn input(&mut self, p: &Path) -> Result<()> {
        self.m
            .inputs
            .insert(p.display().to_string(), digest_path(p)?);
        Ok(())
    }

    fn output(&mut self, p: &Path) -> Result<()> {
        self.m
            .outputs
            .insert(p.display().to_string(), digest_path(p)?);
        Ok(())
    }

    fn count(&mut self, key: &str, n: usize) {
        self.m.counts.insert(key.into(), n);
    }

    fn finish(mut self) -> Result<RunManifest> {
        self.m.finished_unix = now();
        let dir = self.run.resolve(&self.run.config.paths.manifest_dir);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let p = dir.join(format!("{}.json", self.m.stage));
        let body = serde_json::to_string_pretty(&self.m).expect("manifest serializes");
        fs::write(&p, body + "\n").map_err(|e| Error::io(&p, e))?;
        Ok(self.m)
    }
}

fn read_vocab(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

/// Load and segment the corpus, build the index, and save it.
pub fn cmd_index(run: &Run) -> Result<RunManifest> {
    let stage = "index";
    let inner = || -> Result<RunManifest> {
        let cfg = &run.config;
        let mut mf = ManifestBuilder::new(run, stage);
        let corpus_path = run.resolve(&cfg.corpus.path);
        let docs = load_corpus(&corpus_path, cfg.corpus.format)?;
        mf.input(&corpus_path)?;
        let segmenter = match &cfg.corpus.abbreviations {
            Some(list) => Segmenter::with_abbreviations(list),
            None => Segmenter::default(),
        };
        let units = corpus_units(&docs, cfg.corpus.format, &segmenter);
        let n_units = units.len();
        let mut builder = IndexBuilder::new().max_ngram(cfg.index.max_ngram);
        if let Some(v) = &cfg.index.vocab_path {
            let v = run.resolve(v);
            builder = builder.vocab(read_vocab(&v)?);
            mf.input(&v)?;
        }
        let index = builder.build(units)?;
        let dir = run.index_dir();
        save_index(&index, &dir)?;
        mf.output(&dir)?;
        mf.count("documents", docs.len());
        mf.count("units", n_units);
        mf.count("phrases", index.manifest().phrase_count);
        mf.count("postings", index.manifest().posting_count);
        mf.finish()
    };
    inner().map_err(|e| e.in_stage(stage))
}

enum Items {
    Triples(Vec<Triple>),
    Qa(Vec<crate::dataset::QaItem>),
}

/// Split the dataset, retrieve context for the train side only, and emit
/// train/eval prompt files. Eval prompts never carry context.
pub fn cmd_build(run: &Run) -> Result<RunManifest> {
    let stage = "build";
    let inner = || -> Result<RunManifest> {
        let cfg = &run.config;
        let mut mf = ManifestBuilder::new(run, stage);
        let index_dir = run.index_dir();
        let index = load_index(&index_dir)?;
        mf.input(&index_dir)?;
        let data_path = run.resolve(&cfg.dataset.path);
        let items = match cfg.dataset.format {
            DatasetFormat::Tsv3 => Items::Triples(read_triples(&data_path, TripleFormat::Tsv3)?),
            DatasetFormat::Tsv4Aligned => {
                Items::Triples(read_triples(&data_path, TripleFormat::Tsv4Aligned)?)
            }
            DatasetFormat::TacredJson => {
                Items::Triples(read_triples(&data_path, TripleFormat::TacredJson)?)
            }
            DatasetFormat::QaTsv => Items::Qa(read_qa(&data_path, QaFormat::QaTsv)?),
            DatasetFormat::QaJsonl => Items::Qa(read_qa(&data_path, QaFormat::QaJsonl)?),
        };
        mf.input(&data_path)?;
        let tmpl = run.template()?;
        let policy = cfg.prompts.mask_policy()?;

        let (train, eval, n_in, skipped) = match (items, policy) {
            (Items::Triples(triples), Some(policy)) => {
                let (tr, ev) = split(&triples, &cfg.split);
                let b = TripleBuilder {
                    index: &index,
                    run,
                    tmpl: &tmpl,
                    policy,
                };
                let (train, s1) = b.build_all(&tr, Mode::Train)?;
                let (eval, s2) = b.build_all(&ev, Mode::Eval)?;
                (train, eval, triples.len(), s1 + s2)
            }
            (Items::Qa(qa), None) => {
                let (tr, ev) = split(&qa, &cfg.split);
                let build = |items: &[crate::dataset::QaItem], mode| -> Result<Vec<PromptRecord>> {
                    items
                        .par_iter()
                        .map(|q| {
                            let bundle = (mode == Mode::Train).then(|| {
                                let ents: Vec<String> = index
                                    .extract_entities(&q.question)
                                    .into_iter()
                                    .map(|m| m.surface)
                                    .collect();
                                retrieve(&index, &ents, &cfg.retrieval)
                            });
                            let mut r = build_qa_prompt(
                                &q.example_id,
                                &q.question,
                                &q.answer,
                                bundle.as_ref(),
                                &tmpl,
                                mode,
                            )?;
                            r.meta.insert("seed".into(), cfg.prompts.seed.to_string());
                            Ok(r)
                        })
                        .collect()
                };
                let train = build(&tr, Mode::Train)?;
                let eval = build(&ev, Mode::Eval)?;
                (train, eval, qa.len(), 0)
            }
            _ => {
                return Err(Error::Config(
                    "dataset format and prompts.task disagree (QA data needs task = \"qa\")".into(),
                ))
            }
        };

        if let Some(r) = eval.iter().find(|r| r.context_attached) {
            return Err(Error::Contract(format!(
                "eval record {} carries context",
                r.example_id
            )));
        }
        let leaks = scan_leakage(&train)
            .into_iter()
            .chain(scan_leakage(&eval))
            .map(|r| r.example_id.clone())
            .collect::<Vec<_>>();
        if !leaks.is_empty() {
            return Err(Error::Contract(format!(
                "masked values leak in {}",
                leaks.join(", ")
            )));
        }

        let train_out = run.resolve(&cfg.paths.train_out);
        let eval_out = run.resolve(&cfg.paths.eval_out);
        emit_prompts(&train, &train_out)?;
        emit_prompts(&eval, &eval_out)?;
        mf.output(&train_out)?;
        mf.output(&eval_out)?;
        mf.count("examples_in", n_in);
        mf.count("train", train.len());
        mf.count("eval", eval.len());
        mf.count(
            "train_with_context",
            train.iter().filter(|r| r.context_attached).count(),
        );
        mf.count("skipped_leakage", skipped);
        mf.finish()
    };
    inner().map_err(|e| e.in_stage(stage))
}

struct TripleBuilder<'a> {
    index: &'a EntityIndex,
    run: &'a Run,
    tmpl: &'a PromptTemplate,
    policy: MaskPolicy,
}

impl TripleBuilder<'_> {
    /// Records plus the number of triples skipped because a masked value
    /// would leak into the instance text.
    fn build_all(&self, triples: &[Triple], mode: Mode) -> Result<(Vec<PromptRecord>, usize)> {
        let results: Vec<Result<Option<PromptRecord>>> = triples
            .par_iter()
            .map(|t| self.build_one(t, mode))
            .collect();
        let mut out = Vec::with_capacity(results.len());
        let mut skipped = 0;
        for r in results {
            match r? {
                Some(rec) => out.push(rec),
                None => skipped += 1,
            }
        }
        Ok((out, skipped))
    }

    fn build_one(&self, t: &Triple, mode: Mode) -> Result<Option<PromptRecord>> {
        let cfg = &self.run.config;
        let mask = select_mask_with(t, cfg.prompts.seed, self.policy);
        let bundle = (mode == Mode::Train).then(|| {
            let entities: Vec<&str> = Slot::ALL
                .iter()
                .filter(|&&s| s != mask && (s != Slot::Relation || cfg.prompts.retrieve_relation))
                .map(|&s| t.slot(s))
                .collect();
            retrieve(self.index, &entities, &cfg.retrieval)
        });
        match build_triple_prompt(t, mask, bundle.as_ref(), self.tmpl, mode) {
            Ok(mut r) => {
                r.meta.insert("seed".into(), cfg.prompts.seed.to_string());
                r.meta
                    .insert("mask_policy".into(), self.policy.as_str().into());
                Ok(Some(r))
            }
            Err(Error::Leakage { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Score `paths.predictions_in` against `paths.eval_out` and write the report.
pub fn cmd_evaluate(run: &Run) -> Result<(MetricReport, RunManifest)> {
    let stage = "evaluate";
    let inner = || -> Result<(MetricReport, RunManifest)> {
        let cfg = &run.config;
        let mut mf = ManifestBuilder::new(run, stage);
        let preds = cfg
            .paths
            .predictions_in
            .as_ref()
            .map(|p| run.resolve(p))
            .ok_or_else(|| Error::Config("paths.predictions_in is not set".into()))?;
        let report_out = cfg
            .paths
            .report_out
            .as_ref()
            .map(|p| run.resolve(p))
            .ok_or_else(|| Error::Config("paths.report_out is not set".into()))?;
        let gold = run.resolve(&cfg.paths.eval_out);
        let report = evaluate(&preds, &gold, &cfg.metrics)?;
        report.write(&report_out)?;
        mf.input(&preds)?;
        mf.input(&gold)?;
        mf.output(&report_out)?;
        mf.count("examples", report.n_examples);
        Ok((report, mf.finish()?))
    };
    inner().map_err(|e| e.in_stage(stage))
}

/// Posting dump for one entity surface.
pub fn cmd_inspect(index_dir: &Path, entity: &str) -> Result<String> {
    load_index(index_dir)
        .map(|idx| idx.inspect(entity))
        .map_err(|e| e.in_stage("inspect"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[corpus]
path = "corpus"
format = "plain_dir"

[dataset]
path = "triples.tsv"
format = "tsv3"

[prompts]
task = "tail_pred"

[paths]
train_out = "out/train.jsonl"
eval_out = "out/eval.jsonl"
"#;

    #[test]
    fn defaults_fill_in() {
        let run = Run::from_toml(MINIMAL, Path::new("/cfg"), &[]).unwrap();
        let c = &run.config;
        assert_eq!(c.retrieval, RetrievalConfig::default());
        assert_eq!(c.split, SplitSpec::default());
        assert_eq!(c.metrics.ks, [1, 5, 10]);
        assert_eq!(c.index.max_ngram, 6);
        assert_eq!(c.prompts.mask_policy().unwrap(), Some(MaskPolicy::Tail));
        assert_eq!(
            run.resolve(&c.paths.train_out),
            Path::new("/cfg/out/train.jsonl")
        );
    }

    #[test]
    fn overrides_apply_typed_values() {
        let run = Run::from_toml(
            MINIMAL,
            Path::new("."),
            &[
                "retrieval.token_budget=256".into(),
                "retrieval.granularity=paragraph".into(),
                "split.train_fraction=4/5".into(),
                "prompts.mask=random".into(),
            ],
        )
        .unwrap();
        assert_eq!(run.config.retrieval.token_budget, 256);
        assert_eq!(
            run.config.retrieval.granularity,
            crate::retrieval::Granularity::Paragraph
        );
        assert_eq!(run.config.split.train_fraction.floor_of(10), 8);
        assert_eq!(
            run.config.prompts.mask_policy().unwrap(),
            Some(MaskPolicy::Random)
        );
        let base = Run::from_toml(MINIMAL, Path::new("."), &[]).unwrap();
        assert_ne!(run.config_hash(), base.config_hash());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = |o: &str| Run::from_toml(MINIMAL, Path::new("."), &[o.into()]).unwrap_err();
        assert!(matches!(bad("retrieval.token_budget=0"), Error::Config(_)));
        assert!(matches!(bad("prompts.mask=none"), Error::Config(_)));
        assert!(matches!(bad("metrics.ks=[5,1]"), Error::Config(_)));
        assert!(matches!(bad("retrieval.nonsense=1"), Error::Config(_)));
        assert!(matches!(bad("no_equals_sign"), Error::Config(_)));
    }

    #[test]
    fn inspect_reports_stage_on_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_inspect(&dir.path().join("missing"), "x").unwrap_err();
        assert!(err.to_string().starts_with("stage `inspect` failed"));
    }
}
