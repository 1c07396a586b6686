//! Inference attacks: prompt the model to guess an original span back
//! from a candidate replacement embedded in the current state of the
//! sanitized document.
//!
//! The attack context renders the full document with already-selected
//! spans showing their selection, not-yet-processed spans showing their
//! most specific candidate, and the span under test showing the candidate
//! wrapped in double square brackets. Pre-existing double brackets in the
//! source are escaped so the target pair is the only one.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::document::AnnotatedDocument;
use crate::gateway::ChatMessage;
use crate::generation::parse_list_line;
use crate::util::{char_len, char_slice, escape_double_brackets};

const INSTRUCTION_TEMPLATE: &str = include_str!("resources/instruction.txt");
const EXAMPLE_REPLY: &str = include_str!("resources/example_reply.txt");
const FOLLOWUP_TEMPLATE: &str = include_str!("resources/followup.txt");

/// Inference attack parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Number of guesses requested per candidate.
    pub p: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub model_id: String,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            p: 5,
            temperature: 0.3,
            max_new_tokens: 512,
            model_id: String::from("default-chat"),
        }
    }
}

/// Renders the attack context for one candidate of one span.
///
/// `current` holds the text each span presently displays (its selection
/// once made, otherwise its most specific candidate); the entry for
/// `target_index` is ignored and replaced by the bracketed `candidate`.
pub fn render_attack_context(
    doc: &AnnotatedDocument,
    current: &[String],
    target_index: usize,
    candidate: &str,
) -> String {
    debug_assert_eq!(current.len(), doc.spans.len());
    let mut out = String::with_capacity(doc.text.len());
    let mut cursor = 0usize;
    for (i, span) in doc.spans.iter().enumerate() {
        out.push_str(&escape_double_brackets(char_slice(&doc.text, cursor, span.start)));
        if i == target_index {
            out.push_str("[[");
            out.push_str(&escape_double_brackets(candidate));
            out.push_str("]]");
        } else {
            out.push_str(&escape_double_brackets(&current[i]));
        }
        cursor = span.end;
    }
    out.push_str(&escape_double_brackets(char_slice(&doc.text, cursor, char_len(&doc.text))));
    out
}

/// Builds the three-message attack prompt: instruction with the fixed
/// one-shot example, the example guesses, and the rendered context with
/// the candidate under test.
pub fn build_attack_prompt(context: &str, candidate: &str, cfg: &AttackConfig) -> Vec<ChatMessage> {
    let count = match cfg.p {
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
    };
    let instruction = INSTRUCTION_TEMPLATE.trim_end_matches('\n').replace("{count}", &count);
    let followup = FOLLOWUP_TEMPLATE
        .trim_end_matches('\n')
        .replace("{text}", context)
        .replace("{target}", candidate);
    alloc::vec![
        ChatMessage::user(instruction),
        ChatMessage::assistant(EXAMPLE_REPLY.trim_end_matches('\n')),
        ChatMessage::user(followup),
    ]
}

/// Parses up to `p` guesses from a reply.
///
/// Parsing is lenient where candidate parsing is strict: a short guess
/// list only weakens the adversary, so fewer than `p` hyphen lines (even
/// none) still yields a usable guess set.
pub fn parse_guesses(reply: &str, p: usize) -> Vec<String> {
    reply.lines().filter_map(parse_list_line).take(p).collect()
}
