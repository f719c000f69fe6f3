//! Prompt construction for triple-completion and QA examples.
//!
//! Context is only ever attached in [`Mode::Train`]; evaluation prompts are
//! built from the bare instance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::retrieval::ContextBundle;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub aligned_sentence: Option<String>,
    pub example_id: String,
}

impl Triple {
    pub fn new(example_id: &str, head: &str, relation: &str, tail: &str) -> Self {
        Self {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
            aligned_sentence: None,
            example_id: example_id.into(),
        }
    }

    pub fn slot(&self, slot: Slot) -> &str {
        match slot {
            Slot::Head => &self.head,
            Slot::Relation => &self.relation,
            Slot::Tail => &self.tail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Head,
    Relation,
    Tail,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Head, Slot::Relation, Slot::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Head => "head",
            Slot::Relation => "relation",
            Slot::Tail => "tail",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Slot::Head => Task::HeadPred,
            Slot::Relation => Task::RelationPred,
            Slot::Tail => Task::TailPred,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The masked slot recorded on a [`PromptRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskTarget {
    Head,
    Relation,
    Tail,
    None,
}

impl From<Slot> for MaskTarget {
    fn from(s: Slot) -> Self {
        match s {
            Slot::Head => MaskTarget::Head,
            Slot::Relation => MaskTarget::Relation,
            Slot::Tail => MaskTarget::Tail,
        }
    }
}

impl MaskTarget {
    pub fn slot(self) -> Option<Slot> {
        match self {
            MaskTarget::Head => Some(Slot::Head),
            MaskTarget::Relation => Some(Slot::Relation),
            MaskTarget::Tail => Some(Slot::Tail),
            MaskTarget::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    TailPred,
    RelationPred,
    HeadPred,
    Qa,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::TailPred => "tail_pred",
            Task::RelationPred => "relation_pred",
            Task::HeadPred => "head_pred",
            Task::Qa => "qa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// How the masked slot is chosen for each triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    Random,
    Head,
    Relation,
    Tail,
}

impl FromStr for MaskPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "head" => Ok(Self::Head),
            "relation" => Ok(Self::Relation),
            "tail" => Ok(Self::Tail),
            other => Err(Error::Config(format!("unknown mask policy `{other}`"))),
        }
    }
}

impl MaskPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskPolicy::Random => "random",
            MaskPolicy::Head => "head",
            MaskPolicy::Relation => "relation",
            MaskPolicy::Tail => "tail",
        }
    }
}

/// ChaCha8 stream keyed by SHA-256 of `seed` (LE) and the example id.
fn example_rng(seed: u64, example_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(example_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Uniform choice among head, relation and tail, reproducible from
/// `(seed, example_id)` on every platform.
pub fn select_mask(triple: &Triple, seed: u64) -> Slot {
    let mut rng = example_rng(seed, &triple.example_id);
    // Rejection sampling keeps the draw exactly uniform.
    const SPAN: u64 = 1 << 32;
    const ZONE: u64 = SPAN - SPAN % 3;
    loop {
        let x = rng.next_u32();
        if u64::from(x) < ZONE {
            return Slot::ALL[(x % 3) as usize];
        }
    }
}

pub fn select_mask_with(triple: &Triple, seed: u64, policy: MaskPolicy) -> Slot {
    match policy {
        MaskPolicy::Random => select_mask(triple, seed),
        MaskPolicy::Head => Slot::Head,
        MaskPolicy::Relation => Slot::Relation,
        MaskPolicy::Tail => Slot::Tail,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextPosition {
    /// Instance, then context.
    After,
    Before,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub template_id: String,
    pub instruction: String,
    #[serde(default = "default_slot_order")]
    pub slot_order: Vec<Slot>,
    #[serde(default = "default_context_prefix")]
    pub context_prefix: String,
    #[serde(default = "default_separator")]
    pub separator: String,
    #[serde(default = "default_slot_separator")]
    pub slot_separator: String,
    #[serde(default = "default_context_position")]
    pub context_position: ContextPosition,
}

fn default_slot_order() -> Vec<Slot> {
    Slot::ALL.to_vec()
}
fn default_context_prefix() -> String {
    "Context:".into()
}
fn default_separator() -> String {
    " ".into()
}
fn default_slot_separator() -> String {
    " | ".into()
}
fn default_context_position() -> ContextPosition {
    ContextPosition::After
}

impl PromptTemplate {
    pub fn triple_default() -> Self {
        Self {
            template_id: "triple-v1".into(),
            instruction: "Predict the missing element:".into(),
            slot_order: default_slot_order(),
            context_prefix: default_context_prefix(),
            separator: default_separator(),
            slot_separator: default_slot_separator(),
            context_position: ContextPosition::After,
        }
    }

    pub fn qa_default() -> Self {
        Self {
            template_id: "qa-v1".into(),
            instruction: "Answer the question:".into(),
            ..Self::triple_default()
        }
    }

    /// Built-in templates by id.
    pub fn builtin(id: &str) -> Option<Self> {
        match id {
            "triple-v1" => Some(Self::triple_default()),
            "qa-v1" => Some(Self::qa_default()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.instruction.trim().is_empty() {
            return Err(Error::Validation(format!(
                "template {} has an empty instruction",
                self.template_id
            )));
        }
        let mut order = self.slot_order.clone();
        order.sort();
        if order != Slot::ALL {
            return Err(Error::Validation(format!(
                "template {} slot_order must list head, relation and tail once",
                self.template_id
            )));
        }
        Ok(())
    }

    /// Unmasked slots in template order; the masked one renders as nothing.
    fn render_slots(&self, triple: &Triple, mask: Slot) -> String {
        let sep = self.slot_separator.trim();
        let mut out = String::new();
        for (i, &slot) in self.slot_order.iter().enumerate() {
            if i > 0 {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(sep);
            }
            if slot != mask {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(triple.slot(slot));
            }
        }
        out
    }

    fn context_text(&self, bundle: &ContextBundle) -> String {
        let mut s = self.context_prefix.clone();
        for snip in &bundle.snippets {
            s.push(' ');
            s.push_str(&snip.text);
        }
        s
    }

    /// Returns the full input and the byte range of the non-context part.
    fn assemble(
        &self,
        instance: &str,
        context: Option<String>,
    ) -> (String, std::ops::Range<usize>) {
        let base = format!("{}{}{}", self.instruction, self.separator, instance);
        match (context, self.context_position) {
            (None, _) => {
                let n = base.len();
                (base, 0..n)
            }
            (Some(ctx), ContextPosition::After) => {
                let n = base.len();
                (format!("{base}{}{ctx}", self.separator), 0..n)
            }
            (Some(ctx), ContextPosition::Before) => {
                let start = ctx.len() + self.separator.len();
                (
                    format!("{ctx}{}{base}", self.separator),
                    start..start + base.len(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRecord {
    pub example_id: String,
    pub input_text: String,
    pub target_text: String,
    pub mask_target: MaskTarget,
    pub context_attached: bool,
    pub task: Task,
    pub meta: BTreeMap<String, String>,
}

pub const META_TEMPLATE: &str = "template_id";
pub const META_CONTEXT_IDS: &str = "context_ids";
/// Byte range `start..end` of the non-context part of `input_text`.
pub const META_INSTANCE_SPAN: &str = "instance_span";

impl PromptRecord {
    /// The instruction-plus-instance part of `input_text`, without context.
    pub fn instance_text(&self) -> &str {
        self.meta
            .get(META_INSTANCE_SPAN)
            .and_then(|s| s.split_once(".."))
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .and_then(|(a, b)| self.input_text.get(a..b))
            .unwrap_or(&self.input_text)
    }
}

fn check_mode(mode: Mode, bundle: Option<&ContextBundle>, example_id: &str) -> Result<()> {
    if mode == Mode::Eval && bundle.is_some() {
        return Err(Error::Contract(format!(
            "example {example_id}: context supplied for an eval-mode prompt"
        )));
    }
    Ok(())
}

fn base_meta(tmpl: &PromptTemplate, bundle: Option<&ContextBundle>) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    meta.insert(META_TEMPLATE.into(), tmpl.template_id.clone());
    if let Some(b) = bundle.filter(|b| !b.is_empty()) {
        meta.insert(META_CONTEXT_IDS.into(), b.provenance_ids());
    }
    meta
}

/// Build a masked triple prompt.
///
/// The masked value becomes `target_text` and must not appear in the
/// instance part of the input; context snippets may contain it.
pub fn build_triple_prompt(
    triple: &Triple,
    mask: Slot,
    bundle: Option<&ContextBundle>,
    tmpl: &PromptTemplate,
    mode: Mode,
) -> Result<PromptRecord> {
    check_mode(mode, bundle, &triple.example_id)?;
    let target = triple.slot(mask);
    if Slot::ALL.iter().any(|&s| triple.slot(s).trim().is_empty()) {
        return Err(Error::Validation(format!(
            "example {}: triple has an empty slot",
            triple.example_id
        )));
    }
    let context = bundle
        .filter(|b| !b.is_empty())
        .map(|b| tmpl.context_text(b));
    let context_attached = context.is_some();
    let (input_text, span) = tmpl.assemble(&tmpl.render_slots(triple, mask), context);
    if input_text[span.clone()].contains(target) {
        return Err(Error::Leakage {
            example_id: triple.example_id.clone(),
            slot: mask.to_string(),
        });
    }
    let mut meta = base_meta(tmpl, bundle);
    meta.insert(
        META_INSTANCE_SPAN.into(),
        format!("{}..{}", span.start, span.end),
    );
    for s in Slot::ALL {
        meta.insert(s.as_str().into(), triple.slot(s).to_owned());
    }
    Ok(PromptRecord {
        example_id: triple.example_id.clone(),
        input_text,
        target_text: target.to_owned(),
        mask_target: mask.into(),
        context_attached,
        task: mask.task(),
        meta,
    })
}

/// Build a QA prompt: instruction, question and (train only) context.
pub fn build_qa_prompt(
    example_id: &str,
    question: &str,
    answer: &str,
    bundle: Option<&ContextBundle>,
    tmpl: &PromptTemplate,
    mode: Mode,
) -> Result<PromptRecord> {
    check_mode(mode, bundle, example_id)?;
    if question.trim().is_empty() || answer.trim().is_empty() {
        return Err(Error::Validation(format!(
            "example {example_id}: question and answer must be non-empty"
        )));
    }
    let context = bundle
        .filter(|b| !b.is_empty())
        .map(|b| tmpl.context_text(b));
    let context_attached = context.is_some();
    let (input_text, span) = tmpl.assemble(question.trim(), context);
    let mut meta = base_meta(tmpl, bundle);
    meta.insert(
        META_INSTANCE_SPAN.into(),
        format!("{}..{}", span.start, span.end),
    );
    Ok(PromptRecord {
        example_id: example_id.into(),
        input_text,
        target_text: answer.trim().into(),
        mask_target: MaskTarget::None,
        context_attached,
        task: Task::Qa,
        meta,
    })
}

/// Records whose masked slot value occurs outside the context segment.
pub fn scan_leakage(records: &[PromptRecord]) -> Vec<&PromptRecord> {
    records
        .iter()
        .filter(|r| r.mask_target != MaskTarget::None)
        .filter(|r| r.instance_text().contains(r.target_text.as_str()))
        .collect()
}
