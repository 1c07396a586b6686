//! End-to-end sanitization: candidate generation for every span, then
//! attack-guided selection of the most specific safe candidate, plus the
//! baseline strategies used for comparison.
//!
//! Spans are processed in order of occurrence. Direct identifiers are
//! pre-selected to their `LABEL_k` placeholder and never attacked;
//! repeated mentions of one entity reuse the first mention's selection.
//! For everything else the candidates are tested in generated order
//! against the inference attack, and the first candidate the attack fails
//! to match is selected; if every candidate is matched the entity label
//! plus a running number is used instead.
//!
//! With `early_exit` (the default) attacks stop at the first safe
//! candidate; the full mode attacks all candidates first and then picks
//! the minimal safe rank. Both modes select identical replacements, the
//! full mode just spends more model calls.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attack::{build_attack_prompt, parse_guesses, render_attack_context, AttackConfig};
use crate::document::{
    apply_replacements, AnnotatedDocument, CandidateList, CandidateSource, DocumentError,
    EntityLabel, GuessSet, ReplacementRecord, SanitizedDocument, SelectedRank, SpanRef, Strategy,
};
use crate::gateway::{ChatModel, ChatRequest, GatewayError};
use crate::generation::{
    build_generation_prompt, generalize_date, generalize_direct_identifier, parse_candidates,
    GenerationConfig, GenerationError, LabelCounters, PromptBundle,
};
use crate::text::{risky_replace, sentence_context, sentence_ranges, Lexicon, MatchConfig};

/// Everything a sanitization run needs to know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub generation: GenerationConfig,
    pub attack: AttackConfig,
    pub matching: MatchConfig,
    pub strategy: Strategy,
    /// Stop attacking a span's candidates at the first safe one.
    pub early_exit: bool,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            generation: GenerationConfig::default(),
            attack: AttackConfig::default(),
            matching: MatchConfig::default(),
            strategy: Strategy::Intact,
            early_exit: true,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    /// The gateway gave up; the document is aborted rather than emitted
    /// partially sanitized.
    #[error("{doc_id}: model gateway failed: {source}")]
    Model { doc_id: String, source: GatewayError },
    #[error("{doc_id}: span {span_index}: {source}")]
    Generation { doc_id: String, span_index: usize, source: GenerationError },
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("{doc_id}: span {span_index} has no candidates for strategy {strategy}")]
    MissingCandidates { doc_id: String, span_index: usize, strategy: Strategy },
}

/// Per-span candidate lists plus the bookkeeping selection needs.
pub struct GenerationOutcome {
    pub lists: Vec<CandidateList>,
    /// Spans whose generation failed after the retry and fell back to the
    /// entity label placeholder.
    pub generation_failed: Vec<bool>,
    /// First span index of each entity.
    pub first_mention: BTreeMap<String, usize>,
    pub counters: LabelCounters,
}

/// Generates candidate lists for every span, in span order.
///
/// Direct identifiers take the placeholder rule, parseable dates the
/// generalization ladder, and everything else one model call (retried
/// once on a malformed reply, then falling back to the entity label).
/// Later mentions of an entity share the first mention's list.
pub fn generate_candidates(
    doc: &AnnotatedDocument,
    cfg: &PipelineConfig,
    chat: &dyn ChatModel,
    bundle: &PromptBundle,
    lexicon: &Lexicon,
) -> Result<GenerationOutcome, PipelineError> {
    let ranges = sentence_ranges(&doc.text, &doc.spans, lexicon);
    let mut counters = LabelCounters::new();
    let mut first_mention: BTreeMap<String, usize> = BTreeMap::new();
    let mut lists: Vec<CandidateList> = Vec::with_capacity(doc.spans.len());
    let mut generation_failed = alloc::vec![false; doc.spans.len()];

    for (i, span) in doc.spans.iter().enumerate() {
        if let Some(&first) = first_mention.get(&span.entity_id) {
            let mut list = lists[first].clone();
            list.span_index = i;
            generation_failed[i] = generation_failed[first];
            lists.push(list);
            continue;
        }
        first_mention.insert(span.entity_id.clone(), i);

        if span.label.is_direct_identifier() {
            lists.push(generalize_direct_identifier(span, i, &mut counters));
            continue;
        }
        if span.label == EntityLabel::Datetime {
            if let Some(list) = generalize_date(span, i, cfg.generation.m) {
                lists.push(list);
                continue;
            }
        }

        let ctx = sentence_context(doc, i, &ranges);
        let messages = build_generation_prompt(span, &ctx, bundle, &cfg.generation)
            .map_err(|source| PipelineError::Generation {
                doc_id: doc.doc_id.clone(),
                span_index: i,
                source,
            })?;
        let mut candidates = None;
        for _attempt in 0..2 {
            let request = ChatRequest::new(
                cfg.generation.model_id.clone(),
                messages.clone(),
                cfg.generation.temperature,
                cfg.generation.max_new_tokens,
            )
            .expect("prompt builder emits alternating roles");
            let reply = chat
                .chat(&request)
                .map_err(|source| PipelineError::Model { doc_id: doc.doc_id.clone(), source })?;
            match parse_candidates(&reply, cfg.generation.m) {
                Ok(parsed) => {
                    candidates = Some(parsed);
                    break;
                }
                Err(GenerationError::MalformedReply { .. }) => continue,
                Err(source) => {
                    return Err(PipelineError::Generation {
                        doc_id: doc.doc_id.clone(),
                        span_index: i,
                        source,
                    })
                }
            }
        }
        match candidates {
            Some(candidates) => {
                lists.push(CandidateList { span_index: i, candidates, source: CandidateSource::Llm })
            }
            None => {
                // Malformed twice: fall back to the entity label.
                generation_failed[i] = true;
                lists.push(CandidateList {
                    span_index: i,
                    candidates: Vec::new(),
                    source: CandidateSource::Llm,
                });
            }
        }
    }

    Ok(GenerationOutcome { lists, generation_failed, first_mention, counters })
}

/// Runs the full two-stage sanitization of one document.
pub fn sanitize(
    doc: &AnnotatedDocument,
    cfg: &PipelineConfig,
    chat: &dyn ChatModel,
    bundle: &PromptBundle,
    lexicon: &Lexicon,
) -> Result<SanitizedDocument, PipelineError> {
    let GenerationOutcome { lists, generation_failed, first_mention, mut counters } =
        generate_candidates(doc, cfg, chat, bundle, lexicon)?;

    // The working state of the sanitized document: selections once made,
    // otherwise the most specific candidate.
    let mut current: Vec<String> = doc
        .spans
        .iter()
        .enumerate()
        .map(|(i, span)| match lists[i].candidates.first() {
            Some(first) => first.clone(),
            None => {
                debug_assert!(generation_failed[i] || lists[i].candidates.is_empty());
                counters.placeholder(span)
            }
        })
        .collect();

    let mut records: Vec<Option<ReplacementRecord>> = alloc::vec![None; doc.spans.len()];

    for (i, span) in doc.spans.iter().enumerate() {
        let first = first_mention[&span.entity_id];
        if first != i {
            // Reuse the first mention's selection.
            let earlier = records[first].as_ref().expect("earlier mention already selected");
            let record = ReplacementRecord {
                span: SpanRef::of(doc, i),
                candidate_list: lists[i].clone(),
                guess_sets: Vec::new(),
                selected: earlier.selected.clone(),
                selected_rank: earlier.selected_rank,
                fallback_label: earlier.fallback_label.clone(),
            };
            current[i] = record.selected.clone();
            records[i] = Some(record);
            continue;
        }

        let list = &lists[i];
        let record = if list.source == CandidateSource::DirectIdRule {
            // Pre-selected; the placeholder is final and never attacked.
            ReplacementRecord {
                span: SpanRef::of(doc, i),
                candidate_list: list.clone(),
                guess_sets: Vec::new(),
                selected: list.candidates[0].clone(),
                selected_rank: SelectedRank::Rank(1),
                fallback_label: None,
            }
        } else if list.candidates.is_empty() {
            // Generation fell back to the entity label.
            let label = counters.placeholder(span);
            ReplacementRecord {
                span: SpanRef::of(doc, i),
                candidate_list: list.clone(),
                guess_sets: Vec::new(),
                selected: label.clone(),
                selected_rank: SelectedRank::Fallback,
                fallback_label: Some(label),
            }
        } else {
            let mut guess_sets = Vec::new();
            let mut safe_rank: Option<usize> = None;
            for (j, candidate) in list.candidates.iter().enumerate() {
                let context = render_attack_context(doc, &current, i, candidate);
                let messages = build_attack_prompt(&context, candidate, &cfg.attack);
                let request = ChatRequest::new(
                    cfg.attack.model_id.clone(),
                    messages,
                    cfg.attack.temperature,
                    cfg.attack.max_new_tokens,
                )
                .expect("prompt builder emits alternating roles");
                let reply = chat
                    .chat(&request)
                    .map_err(|source| PipelineError::Model { doc_id: doc.doc_id.clone(), source })?;
                let guesses = parse_guesses(&reply, cfg.attack.p);
                let risky = risky_replace(span, &guesses, &cfg.matching, lexicon);
                guess_sets.push(GuessSet { candidate_index: j, guesses });
                if !risky && safe_rank.is_none() {
                    safe_rank = Some(j + 1);
                    if cfg.early_exit {
                        break;
                    }
                }
            }
            match safe_rank {
                Some(rank) => ReplacementRecord {
                    span: SpanRef::of(doc, i),
                    candidate_list: list.clone(),
                    guess_sets,
                    selected: list.candidates[rank - 1].clone(),
                    selected_rank: SelectedRank::Rank(rank),
                    fallback_label: None,
                },
                None => {
                    let label = counters.placeholder(span);
                    ReplacementRecord {
                        span: SpanRef::of(doc, i),
                        candidate_list: list.clone(),
                        guess_sets,
                        selected: label.clone(),
                        selected_rank: SelectedRank::Fallback,
                        fallback_label: Some(label),
                    }
                }
            }
        };

        // Keep every mention of the entity in step with the selection.
        for (k, other) in doc.spans.iter().enumerate() {
            if other.entity_id == span.entity_id {
                current[k] = record.selected.clone();
            }
        }
        records[i] = Some(record);
    }

    let records: Vec<ReplacementRecord> = records.into_iter().map(Option::unwrap).collect();
    Ok(apply_replacements(doc, records, cfg.strategy)?)
}

/// Applies one of the baseline strategies.
///
/// `SUPPRESSION` removes every span; `ENTITY_TYPE` substitutes the plain
/// label text. `LEAST_SPECIFIC`/`MOST_SPECIFIC` take the last/first
/// candidate and need the generated candidate lists (direct identifiers
/// keep their single rule candidate either way).
pub fn sanitize_baseline(
    doc: &AnnotatedDocument,
    strategy: Strategy,
    candidate_lists: Option<&[CandidateList]>,
) -> Result<SanitizedDocument, PipelineError> {
    let mut records = Vec::with_capacity(doc.spans.len());
    for (i, span) in doc.spans.iter().enumerate() {
        let record = match strategy {
            Strategy::Intact => {
                return Err(PipelineError::MissingCandidates {
                    doc_id: doc.doc_id.clone(),
                    span_index: i,
                    strategy,
                })
            }
            Strategy::Suppression => baseline_record(SpanRef::of(doc, i), String::new()),
            Strategy::EntityType => {
                baseline_record(SpanRef::of(doc, i), String::from(span.label.as_str()))
            }
            Strategy::LeastSpecific | Strategy::MostSpecific => {
                let list = candidate_lists
                    .and_then(|lists| lists.get(i))
                    .filter(|list| !list.candidates.is_empty())
                    .ok_or_else(|| PipelineError::MissingCandidates {
                        doc_id: doc.doc_id.clone(),
                        span_index: i,
                        strategy,
                    })?;
                let rank = if strategy == Strategy::MostSpecific || list.candidates.len() == 1 {
                    1
                } else {
                    list.candidates.len()
                };
                ReplacementRecord {
                    span: SpanRef::of(doc, i),
                    candidate_list: list.clone(),
                    guess_sets: Vec::new(),
                    selected: list.candidates[rank - 1].clone(),
                    selected_rank: SelectedRank::Rank(rank),
                    fallback_label: None,
                }
            }
        };
        records.push(record);
    }
    Ok(apply_replacements(doc, records, strategy)?)
}

fn baseline_record(span: SpanRef, selected: String) -> ReplacementRecord {
    ReplacementRecord {
        span,
        candidate_list: CandidateList {
            span_index: span.index,
            candidates: Vec::new(),
            source: CandidateSource::Llm,
        },
        guess_sets: Vec::new(),
        selected: selected.clone(),
        selected_rank: SelectedRank::Fallback,
        fallback_label: Some(selected),
    }
}

/// How often each rank (and the fallback) was selected, per label and
/// overall. Direct-identifier spans are rule-replaced and excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStatistics {
    pub m: usize,
    pub rows: Vec<StatRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    /// `None` is the ALL row.
    pub label: Option<EntityLabel>,
    /// Counts for ranks `1..=m`.
    pub rank_counts: Vec<u64>,
    pub fallback_count: u64,
    pub total: u64,
}

impl StatRow {
    /// Percentages for ranks `1..=m` then fallback; sums to 100 up to
    /// rounding, all zeros for an empty row.
    pub fn percentages(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rank_counts.len() + 1);
        for &c in self.rank_counts.iter().chain(core::iter::once(&self.fallback_count)) {
            if self.total == 0 {
                out.push(0.0);
            } else {
                out.push(100.0 * c as f64 / self.total as f64);
            }
        }
        out
    }
}

const QUASI_LABELS: [EntityLabel; 6] = [
    EntityLabel::Org,
    EntityLabel::Datetime,
    EntityLabel::Loc,
    EntityLabel::Quantity,
    EntityLabel::Dem,
    EntityLabel::Misc,
];

/// Tabulates selected-rank frequencies over a corpus of results.
pub fn selection_statistics(results: &[SanitizedDocument], m: usize) -> SelectionStatistics {
    let mut per_label: BTreeMap<EntityLabel, StatRow> = QUASI_LABELS
        .iter()
        .map(|&label| {
            (
                label,
                StatRow {
                    label: Some(label),
                    rank_counts: alloc::vec![0; m],
                    fallback_count: 0,
                    total: 0,
                },
            )
        })
        .collect();
    let mut all =
        StatRow { label: None, rank_counts: alloc::vec![0; m], fallback_count: 0, total: 0 };

    for doc in results {
        for record in &doc.records {
            if record.candidate_list.source == CandidateSource::DirectIdRule {
                continue;
            }
            let row = match per_label.get_mut(&record.span.label) {
                Some(row) => row,
                None => continue,
            };
            match record.selected_rank {
                SelectedRank::Rank(r) if r >= 1 && r <= m => {
                    row.rank_counts[r - 1] += 1;
                    all.rank_counts[r - 1] += 1;
                }
                _ => {
                    row.fallback_count += 1;
                    all.fallback_count += 1;
                }
            }
            row.total += 1;
            all.total += 1;
        }
    }

    let mut rows: Vec<StatRow> =
        QUASI_LABELS.iter().map(|label| per_label.remove(label).unwrap()).collect();
    rows.push(all);
    SelectionStatistics { m, rows }
}

impl SelectionStatistics {
    /// Plain-text table: one row per label plus ALL, columns for each
    /// rank, the fallback, counts and totals.
    pub fn render_table(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "label");
        for r in 1..=self.m {
            let _ = write!(out, " {:>8}", alloc::format!("rank{r}%"));
        }
        let _ = writeln!(out, " {:>9} {:>8}", "fallback%", "total");
        for row in &self.rows {
            let name = row.label.map(|l| l.as_str()).unwrap_or("ALL");
            let _ = write!(out, "{name:<10}");
            for pct in row.percentages() {
                let _ = write!(out, " {:>8.2}", pct);
            }
            let _ = writeln!(out, " {:>8}", row.total);
        }
        out
    }
}
