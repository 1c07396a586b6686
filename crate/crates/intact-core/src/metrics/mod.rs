//! Annotation-free utility metrics.
//!
//! A document is segmented into scoring spans (the annotated PII spans
//! plus every remaining non-stopword word). Each span's probability is
//! estimated with a masked-token scorer under an alternating schedule:
//! pass `r` of `N` masks the spans whose index is congruent to `r` mod
//! `N`, leaving the others as context, so every span is masked exactly
//! once across the `N` passes. For multi-token spans the minimum token
//! probability is kept.
//!
//! Information content is `-ln p`, a span's relative information content
//! is its share of the document total, and TPS is the RIC-weighted sum of
//! the semantic similarities between original spans and their
//! replacements (unedited spans count 1, suppressed spans 0).

pub mod cluster;

pub use cluster::{
    clustering_utility, kmeanspp_cluster, nmi, ClusterUtilityReport, ClusteringConfig,
    KmeansOutcome,
};

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::document::{AnnotatedDocument, SanitizedDocument};
use crate::gateway::{EmbedRequest, Embedder, GatewayError, MaskScoreRequest, MaskScorer};
use crate::text::{tokenize, Lexicon};
use crate::util::{char_len, char_slice};

/// Probabilities are floored here so information content stays finite
/// when a scorer underflows.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("degenerate input: {detail}")]
    DegenerateInput { detail: String },
    #[error("mismatched inputs: {detail}")]
    MismatchedInputs { detail: String },
}

/// Masked-scoring parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskScoringConfig {
    /// The `N` of the alternating schedule; one span in `N` is masked per
    /// pass.
    pub spacing: usize,
    pub mask_sentinel: String,
    pub model_id: String,
}

impl Default for MaskScoringConfig {
    fn default() -> Self {
        MaskScoringConfig {
            spacing: 6,
            mask_sentinel: String::from("[MASK]"),
            model_id: String::from("default-scorer"),
        }
    }
}

/// What a scoring span covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoringSpanKind {
    /// An annotated PII span (by index into the document's spans).
    Annotated(usize),
    /// A plain non-stopword word.
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoringSpan {
    pub start: usize,
    pub end: usize,
    pub kind: ScoringSpanKind,
}

/// A scoring span with its probability, information content and relative
/// information content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub kind: ScoringSpanKind,
    pub probability: f64,
    pub ic: f64,
    pub ric: f64,
}

/// Segments a document into non-overlapping scoring spans: annotated
/// spans (never split) plus every remaining non-stopword word.
pub fn segment_scoring_spans(doc: &AnnotatedDocument, lexicon: &Lexicon) -> Vec<ScoringSpan> {
    let mut out = Vec::new();
    let len = char_len(&doc.text);
    let mut cursor = 0usize;
    let push_words = |from: usize, to: usize, out: &mut Vec<ScoringSpan>| {
        if from >= to {
            return;
        }
        let slice = char_slice(&doc.text, from, to);
        for token in tokenize(slice) {
            let lower: String = token.text.chars().flat_map(char::to_lowercase).collect();
            if lexicon.is_stopword(&lower) {
                continue;
            }
            out.push(ScoringSpan {
                start: from + token.start,
                end: from + token.end,
                kind: ScoringSpanKind::Word,
            });
        }
    };
    for (i, span) in doc.spans.iter().enumerate() {
        push_words(cursor, span.start, &mut out);
        out.push(ScoringSpan { start: span.start, end: span.end, kind: ScoringSpanKind::Annotated(i) });
        cursor = span.end;
    }
    push_words(cursor, len, &mut out);
    out
}

/// Estimates per-span probabilities with the alternating mask schedule.
///
/// Exactly one scoring request is issued per non-empty pass; the pass
/// order has no effect on the result. Returned values are clamped to
/// `[PROBABILITY_FLOOR, 1]`.
pub fn span_probabilities(
    doc: &AnnotatedDocument,
    spans: &[ScoringSpan],
    scorer: &dyn MaskScorer,
    cfg: &MaskScoringConfig,
) -> Result<Vec<f64>, MetricsError> {
    if cfg.spacing < 2 {
        return Err(MetricsError::DegenerateInput {
            detail: String::from("mask spacing must be at least 2"),
        });
    }
    let mut probabilities = alloc::vec![1.0f64; spans.len()];
    for pass in 0..cfg.spacing {
        let masked: Vec<usize> =
            (0..spans.len()).filter(|i| i % cfg.spacing == pass).collect();
        if masked.is_empty() {
            continue;
        }
        let (request, owners) = build_mask_request(doc, spans, &masked, cfg);
        if request.positions.is_empty() {
            continue;
        }
        let response = scorer.mask_score(&request)?;
        if response.probabilities.len() != request.positions.len() {
            return Err(MetricsError::Gateway(GatewayError::response_format(
                "scorer returned a wrong number of probabilities",
            )));
        }
        for (owner, p) in owners.iter().zip(&response.probabilities) {
            let p = p.clamp(PROBABILITY_FLOOR, 1.0);
            // Multi-token spans keep their least predictable token.
            probabilities[*owner] = probabilities[*owner].min(p);
        }
    }
    Ok(probabilities)
}

/// Renders the document with each masked span's tokens replaced by the
/// sentinel; returns the request and, per sentinel, the index of the
/// scoring span it belongs to.
fn build_mask_request(
    doc: &AnnotatedDocument,
    spans: &[ScoringSpan],
    masked: &[usize],
    cfg: &MaskScoringConfig,
) -> (MaskScoreRequest, Vec<usize>) {
    let mut text = String::with_capacity(doc.text.len());
    let mut text_chars = 0usize;
    let mut positions = Vec::new();
    let mut candidates = Vec::new();
    let mut owners = Vec::new();
    let mut cursor = 0usize;
    let push = |s: &str, text: &mut String, text_chars: &mut usize| {
        text.push_str(s);
        *text_chars += char_len(s);
    };
    for (i, span) in spans.iter().enumerate() {
        push(char_slice(&doc.text, cursor, span.start), &mut text, &mut text_chars);
        let surface = char_slice(&doc.text, span.start, span.end);
        if masked.contains(&i) {
            let mut inner = 0usize;
            for token in tokenize(surface) {
                push(char_slice(surface, inner, token.start), &mut text, &mut text_chars);
                positions.push(text_chars);
                candidates.push(token.text.clone());
                owners.push(i);
                push(&cfg.mask_sentinel, &mut text, &mut text_chars);
                inner = token.end;
            }
            push(char_slice(surface, inner, char_len(surface)), &mut text, &mut text_chars);
        } else {
            push(surface, &mut text, &mut text_chars);
        }
        cursor = span.end;
    }
    push(char_slice(&doc.text, cursor, char_len(&doc.text)), &mut text, &mut text_chars);
    (
        MaskScoreRequest {
            model_id: cfg.model_id.clone(),
            text,
            sentinel: cfg.mask_sentinel.clone(),
            positions,
            candidates,
        },
        owners,
    )
}

/// Information content of a probability: `-ln p` after flooring.
pub fn information_content(probability: f64) -> f64 {
    -libm::log(probability.clamp(PROBABILITY_FLOOR, 1.0))
}

/// Normalizes information contents to their document share. The shares
/// sum to 1; a document whose spans carry no information at all falls
/// back to a uniform split.
pub fn relative_information(ics: &[f64]) -> Vec<f64> {
    let total: f64 = ics.iter().sum();
    if ics.is_empty() {
        return Vec::new();
    }
    if total <= 0.0 {
        return alloc::vec![1.0 / ics.len() as f64; ics.len()];
    }
    ics.iter().map(|ic| ic / total).collect()
}

/// Segments, scores and normalizes one document.
pub fn score_document(
    doc: &AnnotatedDocument,
    scorer: &dyn MaskScorer,
    cfg: &MaskScoringConfig,
    lexicon: &Lexicon,
) -> Result<Vec<ScoredSpan>, MetricsError> {
    let spans = segment_scoring_spans(doc, lexicon);
    let probabilities = span_probabilities(doc, &spans, scorer, cfg)?;
    let ics: Vec<f64> = probabilities.iter().map(|&p| information_content(p)).collect();
    let rics = relative_information(&ics);
    Ok(spans
        .iter()
        .zip(probabilities)
        .zip(ics.iter().zip(rics))
        .map(|((span, probability), (&ic, ric))| ScoredSpan {
            start: span.start,
            end: span.end,
            surface: char_slice(&doc.text, span.start, span.end).to_string(),
            kind: span.kind,
            probability,
            ic,
            ric,
        })
        .collect())
}

/// Cosine similarity of two vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb: f64 = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na <= 0.0 || nb <= 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Similarities are constrained to `[0, 1]`: replacements are related to
/// their originals, so negative cosine carries no signal.
pub fn similarity_from_cosine(c: f64) -> f64 {
    c.max(0.0)
}

/// RIC-weighted sum of similarities.
pub fn weighted_similarity(rics: &[f64], similarities: &[f64]) -> f64 {
    debug_assert_eq!(rics.len(), similarities.len());
    rics.iter().zip(similarities).map(|(r, s)| r * s).sum()
}

/// Per-span utility detail in a [`TpsReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanUtility {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    /// `None` for spans the sanitizer never touched.
    pub replacement: Option<String>,
    pub ric: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsReport {
    pub doc_id: String,
    pub tps: f64,
    pub spans: Vec<SpanUtility>,
}

/// Computes TPS for one document against its sanitized version.
///
/// Unedited spans contribute similarity 1, suppressed spans 0, and every
/// replaced span the clamped cosine between the embeddings of the
/// original surface and its replacement.
pub fn document_tps(
    doc: &AnnotatedDocument,
    sanitized: &SanitizedDocument,
    scorer: &dyn MaskScorer,
    embedder: &dyn Embedder,
    cfg: &MaskScoringConfig,
    embed_model_id: &str,
    lexicon: &Lexicon,
) -> Result<TpsReport, MetricsError> {
    if sanitized.records.len() != doc.spans.len() {
        return Err(MetricsError::MismatchedInputs {
            detail: alloc::format!(
                "{}: {} records for {} spans",
                doc.doc_id,
                sanitized.records.len(),
                doc.spans.len()
            ),
        });
    }
    let scored = score_document(doc, scorer, cfg, lexicon)?;

    // Pair every scored span with its replacement and batch the texts
    // that actually need embedding.
    let mut replacement_of: Vec<Option<&str>> = Vec::with_capacity(scored.len());
    let mut to_embed: Vec<String> = Vec::new();
    let mut embed_slot: Vec<Option<usize>> = Vec::with_capacity(scored.len());
    for span in &scored {
        let replacement = match span.kind {
            ScoringSpanKind::Annotated(i) => Some(sanitized.records[i].selected.as_str()),
            ScoringSpanKind::Word => None,
        };
        replacement_of.push(replacement);
        match replacement {
            Some(r) if !r.is_empty() && r != span.surface => {
                embed_slot.push(Some(to_embed.len()));
                to_embed.push(span.surface.clone());
                to_embed.push(r.to_string());
            }
            _ => embed_slot.push(None),
        }
    }
    let vectors = if to_embed.is_empty() {
        Vec::new()
    } else {
        let response = embedder
            .embed(&EmbedRequest { model_id: embed_model_id.to_string(), texts: to_embed.clone() })?;
        if response.vectors.len() != to_embed.len() {
            return Err(MetricsError::Gateway(GatewayError::response_format(
                "embedder returned a wrong number of vectors",
            )));
        }
        response.vectors
    };

    let mut spans = Vec::with_capacity(scored.len());
    let mut tps = 0.0f64;
    for (i, span) in scored.iter().enumerate() {
        let similarity = match (replacement_of[i], embed_slot[i]) {
            (None, _) => 1.0,
            (Some(r), _) if r == span.surface => 1.0,
            (Some(""), _) => 0.0,
            (Some(_), Some(slot)) => {
                similarity_from_cosine(cosine(&vectors[slot], &vectors[slot + 1]))
            }
            (Some(_), None) => unreachable!("replaced spans are always embedded"),
        };
        tps += span.ric * similarity;
        spans.push(SpanUtility {
            start: span.start,
            end: span.end,
            surface: span.surface.clone(),
            replacement: replacement_of[i].map(str::to_string),
            ric: span.ric,
            similarity,
        });
    }
    Ok(TpsReport { doc_id: doc.doc_id.clone(), tps, spans })
}

/// Document embedding for clustering: the mean over the embeddings of all
/// individual tokens, re-normalized.
pub fn document_embedding(
    text: &str,
    embedder: &dyn Embedder,
    model_id: &str,
) -> Result<Vec<f64>, MetricsError> {
    let tokens: Vec<String> = tokenize(text).into_iter().map(|t| t.text).collect();
    let texts = if tokens.is_empty() { alloc::vec![String::new()] } else { tokens };
    let response =
        embedder.embed(&EmbedRequest { model_id: model_id.to_string(), texts: texts.clone() })?;
    if response.vectors.len() != texts.len() || response.vectors.is_empty() {
        return Err(MetricsError::Gateway(GatewayError::response_format(
            "embedder returned a wrong number of vectors",
        )));
    }
    let dim = response.vectors[0].len();
    let mut mean = alloc::vec![0.0f64; dim];
    for v in &response.vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let n = response.vectors.len() as f64;
    for m in mean.iter_mut() {
        *m /= n;
    }
    crate::gateway::normalize_vector(&mut mean);
    Ok(mean)
}
