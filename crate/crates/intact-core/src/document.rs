//! Document model: annotated input documents, PII spans, candidate lists,
//! replacement records and sanitized output documents.
//!
//! All offsets count Unicode scalar values (characters), not bytes, so the
//! corpus format stays encoding-agnostic. Spans within a document are
//! non-overlapping and sorted by start offset; mentions of one underlying
//! entity share an `entity_id` (taken from the corpus when present,
//! otherwise grouped by exact surface match).
//!
//! Every type is immutable after construction and safe to share across
//! parallel document workers.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::util::{char_len, char_slice};

/// Entity type labels of the annotated corpus.
///
/// Exactly these eight labels are accepted on ingestion. `CODE` and
/// `PERSON` are direct identifiers and handled by rule; the remaining six
/// are quasi-identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityLabel {
    Code,
    Org,
    Datetime,
    Loc,
    Quantity,
    Person,
    Dem,
    Misc,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 8] = [
        EntityLabel::Code,
        EntityLabel::Org,
        EntityLabel::Datetime,
        EntityLabel::Loc,
        EntityLabel::Quantity,
        EntityLabel::Person,
        EntityLabel::Dem,
        EntityLabel::Misc,
    ];

    /// Parses the corpus spelling (`"PERSON"`, `"DATETIME"`, ...).
    pub fn parse(s: &str) -> Option<EntityLabel> {
        match s {
            "CODE" => Some(EntityLabel::Code),
            "ORG" => Some(EntityLabel::Org),
            "DATETIME" => Some(EntityLabel::Datetime),
            "LOC" => Some(EntityLabel::Loc),
            "QUANTITY" => Some(EntityLabel::Quantity),
            "PERSON" => Some(EntityLabel::Person),
            "DEM" => Some(EntityLabel::Dem),
            "MISC" => Some(EntityLabel::Misc),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityLabel::Code => "CODE",
            EntityLabel::Org => "ORG",
            EntityLabel::Datetime => "DATETIME",
            EntityLabel::Loc => "LOC",
            EntityLabel::Quantity => "QUANTITY",
            EntityLabel::Person => "PERSON",
            EntityLabel::Dem => "DEM",
            EntityLabel::Misc => "MISC",
        }
    }

    /// Direct identifiers reveal identity in isolation and are replaced by
    /// rule rather than by model-generated candidates.
    pub fn is_direct_identifier(self) -> bool {
        matches!(self, EntityLabel::Code | EntityLabel::Person)
    }

    /// Labels treated as named entities for the character n-gram branch of
    /// the matching function. `QUANTITY` and `DEM` rely on lemma overlap
    /// only.
    pub fn is_named_entity(self) -> bool {
        matches!(
            self,
            EntityLabel::Person
                | EntityLabel::Org
                | EntityLabel::Loc
                | EntityLabel::Code
                | EntityLabel::Misc
        )
    }
}

impl core::fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Errors raised while validating documents or applying replacements.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocumentError {
    #[error("{doc_id}: span {index} [{start},{end}) is invalid for a document of {len} characters")]
    SpanOutOfRange {
        doc_id: String,
        index: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("{doc_id}: spans [{a_start},{a_end}) and [{b_start},{b_end}) overlap")]
    OverlappingSpans {
        doc_id: String,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
    #[error("{doc_id}: entity `{entity_id}` is annotated both {first} and {second}")]
    ConflictingEntityLabel {
        doc_id: String,
        entity_id: String,
        first: EntityLabel,
        second: EntityLabel,
    },
    #[error("{doc_id}: expected {expected} replacement records, got {got}")]
    MissingRecord {
        doc_id: String,
        expected: usize,
        got: usize,
    },
}

/// A span annotation as it arrives from the corpus, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSpan {
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
    pub entity_id: Option<String>,
}

/// A validated PII span within a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiSpan {
    /// Character offset, 0-based inclusive.
    pub start: usize,
    /// Character offset, exclusive.
    pub end: usize,
    /// The document slice `[start, end)`.
    pub surface: String,
    pub label: EntityLabel,
    /// Groups mentions of the same underlying entity.
    pub entity_id: String,
    /// 0-based ordinal of this mention within its entity group.
    pub mention_index: usize,
}

/// A document with validated PII annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    /// Sorted by start offset; pairwise non-overlapping.
    pub spans: Vec<PiiSpan>,
}

impl AnnotatedDocument {
    /// Validates raw annotations and builds the document.
    ///
    /// Checks offsets against the character length, sorts spans, rejects
    /// overlaps, extracts surfaces, groups mentions into entities and
    /// checks that one entity never carries two labels. Spans without an
    /// `entity_id` are grouped by exact surface match (ids for those groups
    /// are prefixed `surface:` to avoid colliding with corpus ids).
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        raw: Vec<RawSpan>,
    ) -> Result<AnnotatedDocument, DocumentError> {
        let doc_id = doc_id.into();
        let text = text.into();
        let len = char_len(&text);

        for (index, span) in raw.iter().enumerate() {
            if span.start >= span.end || span.end > len {
                return Err(DocumentError::SpanOutOfRange {
                    doc_id,
                    index,
                    start: span.start,
                    end: span.end,
                    len,
                });
            }
        }

        let mut ordered = raw;
        ordered.sort_by_key(|s| (s.start, s.end));
        for pair in ordered.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(DocumentError::OverlappingSpans {
                    doc_id,
                    a_start: pair[0].start,
                    a_end: pair[0].end,
                    b_start: pair[1].start,
                    b_end: pair[1].end,
                });
            }
        }

        let mut entity_labels: BTreeMap<String, EntityLabel> = BTreeMap::new();
        let mut mention_counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut spans = Vec::with_capacity(ordered.len());
        for span in ordered {
            let surface = char_slice(&text, span.start, span.end).to_owned();
            let entity_id = match span.entity_id {
                Some(id) => id,
                None => {
                    let mut id = String::from("surface:");
                    id.push_str(&surface);
                    id
                }
            };
            match entity_labels.get(&entity_id) {
                Some(&first) if first != span.label => {
                    return Err(DocumentError::ConflictingEntityLabel {
                        doc_id,
                        entity_id,
                        first,
                        second: span.label,
                    });
                }
                Some(_) => {}
                None => {
                    entity_labels.insert(entity_id.clone(), span.label);
                }
            }
            let mention_index = {
                let counter = mention_counts.entry(entity_id.clone()).or_insert(0);
                let idx = *counter;
                *counter += 1;
                idx
            };
            spans.push(PiiSpan {
                start: span.start,
                end: span.end,
                surface,
                label: span.label,
                entity_id,
                mention_index,
            });
        }

        Ok(AnnotatedDocument { doc_id, text, spans })
    }

    /// Character length of the document text.
    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }
}

/// Where a candidate list came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSource {
    /// Model-generated, sorted most-specific first.
    Llm,
    /// Heuristic date generalization ladder.
    DateRule,
    /// `LABEL_k` placeholder for direct identifiers; always a single entry.
    DirectIdRule,
}

/// Sorted replacement candidates for one span, most specific first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateList {
    /// Index of the span in its document.
    pub span_index: usize,
    pub candidates: Vec<String>,
    pub source: CandidateSource,
}

/// Guesses produced by one inference attack on one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessSet {
    /// 0-based index of the attacked candidate.
    pub candidate_index: usize,
    /// At most `p` guesses; duplicates kept as the model produced them.
    pub guesses: Vec<String>,
}

/// The rank of the selected replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectedRank {
    /// 1-based rank into the candidate list.
    Rank(usize),
    /// Every candidate was guessed; the entity label plus a running number
    /// was used instead.
    Fallback,
}

/// Identifies the span a record belongs to without holding the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRef {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
}

impl SpanRef {
    pub fn of(doc: &AnnotatedDocument, index: usize) -> SpanRef {
        let span = &doc.spans[index];
        SpanRef { index, start: span.start, end: span.end, label: span.label }
    }
}

/// The full selection outcome for one span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementRecord {
    pub span: SpanRef,
    pub candidate_list: CandidateList,
    pub guess_sets: Vec<GuessSet>,
    pub selected: String,
    pub selected_rank: SelectedRank,
    pub fallback_label: Option<String>,
}

impl ReplacementRecord {
    /// `selected_rank = Fallback` iff `selected` equals the fallback label;
    /// otherwise `selected` equals `candidates[rank - 1]`.
    pub fn is_consistent(&self) -> bool {
        match self.selected_rank {
            SelectedRank::Fallback => self.fallback_label.as_deref() == Some(&self.selected),
            SelectedRank::Rank(r) => {
                r >= 1
                    && self
                        .candidate_list
                        .candidates
                        .get(r - 1)
                        .map(|c| c == &self.selected)
                        .unwrap_or(false)
            }
        }
    }
}

/// Replacement strategies: the attack-guided selection plus the baselines
/// it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    Intact,
    Suppression,
    EntityType,
    LeastSpecific,
    MostSpecific,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "intact" => Some(Strategy::Intact),
            "suppression" => Some(Strategy::Suppression),
            "entity_type" => Some(Strategy::EntityType),
            "least_specific" => Some(Strategy::LeastSpecific),
            "most_specific" => Some(Strategy::MostSpecific),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Intact => "intact",
            Strategy::Suppression => "suppression",
            Strategy::EntityType => "entity_type",
            Strategy::LeastSpecific => "least_specific",
            Strategy::MostSpecific => "most_specific",
        }
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sanitized document together with the records that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizedDocument {
    pub doc_id: String,
    /// The rewritten text; equals `splice_replacements` applied to the
    /// original text and the records' selected replacements.
    pub text: String,
    pub records: Vec<ReplacementRecord>,
    pub strategy: Strategy,
}

/// Rewrites a document by applying one replacement record per span, in
/// span order.
///
/// Mentions of one entity mapped to the same replacement are all rewritten
/// (each mention has its own record). The returned document satisfies the
/// reconstruction invariant: [`splice_replacements`] over the original
/// text and the records' selections reproduces `text` exactly.
pub fn apply_replacements(
    doc: &AnnotatedDocument,
    records: Vec<ReplacementRecord>,
    strategy: Strategy,
) -> Result<SanitizedDocument, DocumentError> {
    if records.len() != doc.spans.len() {
        return Err(DocumentError::MissingRecord {
            doc_id: doc.doc_id.clone(),
            expected: doc.spans.len(),
            got: records.len(),
        });
    }
    let ranges: Vec<(usize, usize)> = doc.spans.iter().map(|s| (s.start, s.end)).collect();
    let replacements: Vec<&str> = records.iter().map(|r| r.selected.as_str()).collect();
    let text = splice_replacements(&doc.text, &ranges, &replacements);
    Ok(SanitizedDocument { doc_id: doc.doc_id.clone(), text, records, strategy })
}

/// Splices replacement texts over span ranges, left to right.
///
/// Non-empty replacements substitute the span slice exactly, so offsets of
/// untouched text keep their relative order. An empty replacement
/// (suppression) removes the span and tidies the seam: doubled whitespace
/// collapses to a single space, whitespace left hanging before punctuation
/// or at the document edges is dropped. Newlines are never collapsed.
pub fn splice_replacements(text: &str, ranges: &[(usize, usize)], replacements: &[&str]) -> String {
    debug_assert_eq!(ranges.len(), replacements.len());
    let n_chars = char_len(text);
    let first_start = ranges.first().map_or(n_chars, |r| r.0);
    let mut out = String::with_capacity(text.len());
    out.push_str(char_slice(text, 0, first_start));
    for (i, (&(_, end), &replacement)) in ranges.iter().zip(replacements).enumerate() {
        let gap_end = ranges.get(i + 1).map_or(n_chars, |r| r.0);
        let mut gap = char_slice(text, end, gap_end).to_owned();
        if replacement.is_empty() {
            suppression_seam(&mut out, &mut gap, i + 1 == ranges.len());
        } else {
            out.push_str(replacement);
        }
        out.push_str(&gap);
    }
    out
}

fn trim_end_spaces(s: &mut String) {
    while s.chars().next_back().is_some_and(|c| c == ' ' || c == '\t') {
        s.pop();
    }
}

/// Seam rule for a suppressed span: `out` is everything emitted so far,
/// `gap` the untouched text up to the next span (or the document tail when
/// `last`).
fn suppression_seam(out: &mut String, gap: &mut String, last: bool) {
    let after_spaces = gap.trim_start_matches([' ', '\t']);
    let next = after_spaces.chars().next();
    if out.chars().all(char::is_whitespace) {
        // Document start: strand no leading whitespace.
        out.clear();
        *gap = gap.trim_start().to_owned();
    } else if matches!(next, Some(',' | '.' | ';' | ':' | '!' | '?')) {
        trim_end_spaces(out);
        *gap = after_spaces.to_owned();
    } else if last && after_spaces.is_empty() {
        // Document end: drop the dangling whitespace on both sides.
        trim_end_spaces(out);
        gap.clear();
    } else if next == Some('\n') {
        trim_end_spaces(out);
    } else if out.chars().next_back().is_some_and(|c| c == ' ' || c == '\t')
        && gap.starts_with([' ', '\t'])
    {
        trim_end_spaces(out);
        out.push(' ');
        *gap = after_spaces.to_owned();
    }
}
