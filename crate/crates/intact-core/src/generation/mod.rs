//! Replacement candidate generation.
//!
//! Most labels are handled by prompting a chat model for a sorted list of
//! generalizations (one-shot, with a per-label example). Direct
//! identifiers (`PERSON`, `CODE`) are replaced by `LABEL_k` placeholders
//! with per-entity numbering, and dates in standard formats take the
//! heuristic generalization ladder in [`date`].

pub mod date;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::document::{CandidateList, CandidateSource, EntityLabel, PiiSpan};
use crate::gateway::ChatMessage;
use crate::text::SentenceContext;
use crate::util::escape_double_brackets;

const INSTRUCTION_TEMPLATE: &str = include_str!("resources/instruction.txt");
const FOLLOWUP_TEMPLATE: &str = include_str!("resources/followup.txt");

const EXAMPLE_ORG: &str = include_str!("resources/examples/org.txt");
const EXAMPLE_DATETIME: &str = include_str!("resources/examples/datetime.txt");
const EXAMPLE_LOC: &str = include_str!("resources/examples/loc.txt");
const EXAMPLE_QUANTITY: &str = include_str!("resources/examples/quantity.txt");
const EXAMPLE_DEM: &str = include_str!("resources/examples/dem.txt");
const EXAMPLE_MISC: &str = include_str!("resources/examples/misc.txt");

/// Candidate generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Number of replacement candidates requested per span.
    pub m: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub model_id: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            m: 5,
            temperature: 0.3,
            max_new_tokens: 512,
            model_id: String::from("default-chat"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("label {label} is rule-handled and has no generation prompt")]
    UnsupportedLabel { label: EntityLabel },
    #[error("no one-shot example for label {label}")]
    MissingExample { label: EntityLabel },
    #[error("malformed reply: found {got} candidates, need {want}")]
    MalformedReply { got: usize, want: usize },
}

/// A one-shot example: a sentence with the target span bracketed, and the
/// sorted replacements the assistant is shown producing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelExample {
    pub sentence: String,
    pub target: String,
    pub replacements: Vec<String>,
}

/// The generation prompt template plus its per-label examples.
#[derive(Debug, Clone)]
pub struct PromptBundle {
    examples: BTreeMap<EntityLabel, LabelExample>,
}

impl PromptBundle {
    /// Loads the embedded template and examples (all six quasi-identifier
    /// labels are covered).
    pub fn builtin() -> PromptBundle {
        let mut examples = BTreeMap::new();
        for (label, raw) in [
            (EntityLabel::Org, EXAMPLE_ORG),
            (EntityLabel::Datetime, EXAMPLE_DATETIME),
            (EntityLabel::Loc, EXAMPLE_LOC),
            (EntityLabel::Quantity, EXAMPLE_QUANTITY),
            (EntityLabel::Dem, EXAMPLE_DEM),
            (EntityLabel::Misc, EXAMPLE_MISC),
        ] {
            examples.insert(label, parse_example(raw));
        }
        PromptBundle { examples }
    }

    pub fn example_for(&self, label: EntityLabel) -> Option<&LabelExample> {
        self.examples.get(&label)
    }
}

/// Example resources: first line is the sentence with `[[target]]`,
/// remaining lines the sorted replacements.
fn parse_example(raw: &str) -> LabelExample {
    let mut lines = raw.lines().filter(|l| !l.trim().is_empty());
    let sentence = lines.next().unwrap_or_default().to_string();
    let replacements: Vec<String> = lines.map(str::to_string).collect();
    let target = sentence
        .split_once("[[")
        .and_then(|(_, rest)| rest.split_once("]]"))
        .map(|(t, _)| t.to_string())
        .unwrap_or_default();
    LabelExample { sentence, target, replacements }
}

/// English number words for the prompt's candidate count.
fn count_words(n: usize) -> String {
    match n {
        1 => "one".to_string(),
        2 => "two".to_string(),
        3 => "three".to_string(),
        4 => "four".to_string(),
        5 => "five".to_string(),
        6 => "six".to_string(),
        7 => "seven".to_string(),
        8 => "eight".to_string(),
        9 => "nine".to_string(),
        10 => "ten".to_string(),
        other => other.to_string(),
    }
}

/// Renders the sentence with the target span wrapped in double square
/// brackets (pre-existing double brackets in the context are escaped).
pub fn bracket_span(ctx: &SentenceContext) -> String {
    let (start, end) = ctx.span_range;
    let chars: Vec<char> = ctx.sentence.chars().collect();
    let before: String = chars[..start].iter().collect();
    let target: String = chars[start..end].iter().collect();
    let after: String = chars[end..].iter().collect();
    format!(
        "{}[[{}]]{}",
        escape_double_brackets(&before),
        escape_double_brackets(&target),
        escape_double_brackets(&after)
    )
}

/// Builds the three-message generation prompt for one span: instruction
/// with the label's one-shot example, the example's sorted replacements,
/// and the bracketed sentence under edit.
pub fn build_generation_prompt(
    span: &PiiSpan,
    ctx: &SentenceContext,
    bundle: &PromptBundle,
    cfg: &GenerationConfig,
) -> Result<Vec<ChatMessage>, GenerationError> {
    if span.label.is_direct_identifier() {
        return Err(GenerationError::UnsupportedLabel { label: span.label });
    }
    let example = bundle
        .example_for(span.label)
        .ok_or(GenerationError::MissingExample { label: span.label })?;
    let count = count_words(cfg.m);
    let instruction = INSTRUCTION_TEMPLATE
        .trim_end_matches('\n')
        .replace("{count}", &count)
        .replace("{example_sentence}", &example.sentence)
        .replace("{example_target}", &example.target);
    let followup = FOLLOWUP_TEMPLATE
        .trim_end_matches('\n')
        .replace("{sentence}", &bracket_span(ctx))
        .replace("{target}", &span.surface);
    Ok(alloc::vec![
        ChatMessage::user(instruction),
        ChatMessage::assistant(render_candidates(&example.replacements)),
        ChatMessage::user(followup),
    ])
}

/// Renders candidates the way the prompt asks for them: one per line,
/// preceded by a hyphen.
pub fn render_candidates(candidates: &[String]) -> String {
    let mut out = String::new();
    for (i, candidate) in candidates.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("- ");
        out.push_str(candidate);
    }
    out
}

/// Parses a model reply into exactly the first `m` candidates.
///
/// Hyphen-prefixed lines are trimmed, surrounding quotes stripped, empty
/// entries dropped and order preserved. Fewer than `m` parseable lines is
/// an error; the pipeline retries once and then falls back to the entity
/// label.
pub fn parse_candidates(reply: &str, m: usize) -> Result<Vec<String>, GenerationError> {
    let candidates: Vec<String> = reply
        .lines()
        .filter_map(parse_list_line)
        .take(m)
        .collect();
    if candidates.len() < m {
        return Err(GenerationError::MalformedReply { got: candidates.len(), want: m });
    }
    Ok(candidates)
}

/// Parses one `- entry` line; also used for attack guesses.
pub(crate) fn parse_list_line(line: &str) -> Option<String> {
    let trimmed = line.trim();
    let body = trimmed.strip_prefix('-')?.trim();
    let body = body
        .trim_start_matches(['"', '\u{201c}', '\''])
        .trim_end_matches(['"', '\u{201d}', '\''])
        .trim();
    if body.is_empty() {
        None
    } else {
        Some(body.to_string())
    }
}

/// Per-document label counters for `LABEL_k` placeholders.
///
/// Numbers are allocated per entity in first-need order, so repeated
/// mentions of one entity share a placeholder and numbering is a bijection
/// between a label's entities and `1..=k`.
#[derive(Debug, Clone, Default)]
pub struct LabelCounters {
    next: BTreeMap<EntityLabel, usize>,
    assigned: BTreeMap<String, String>,
}

impl LabelCounters {
    pub fn new() -> LabelCounters {
        LabelCounters::default()
    }

    /// The placeholder for a span's entity, allocating on first use.
    pub fn placeholder(&mut self, span: &PiiSpan) -> String {
        if let Some(existing) = self.assigned.get(&span.entity_id) {
            return existing.clone();
        }
        let counter = self.next.entry(span.label).or_insert(1);
        let label = format!("{}_{}", span.label.as_str(), *counter);
        *counter += 1;
        self.assigned.insert(span.entity_id.clone(), label.clone());
        label
    }
}

/// Rule replacement for direct identifiers: a single `LABEL_k` candidate.
pub fn generalize_direct_identifier(
    span: &PiiSpan,
    span_index: usize,
    counters: &mut LabelCounters,
) -> CandidateList {
    debug_assert!(span.label.is_direct_identifier());
    CandidateList {
        span_index,
        candidates: alloc::vec![counters.placeholder(span)],
        source: CandidateSource::DirectIdRule,
    }
}

/// Rule generalization for dates in standard formats; `None` routes the
/// span to the model path.
pub fn generalize_date(span: &PiiSpan, span_index: usize, m: usize) -> Option<CandidateList> {
    let parsed = date::parse_date(&span.surface)?;
    let rungs = date::date_ladder(&parsed, m)?;
    Some(CandidateList {
        span_index,
        candidates: rungs.into_iter().map(|r| r.text).collect(),
        source: CandidateSource::DateRule,
    })
}
