//! Corpus file formats: line-delimited JSON, one document per line.
//!
//! Input records carry `doc_id`, `text` and `annotations` (start/end
//! character offsets, label, optional entity id). Sanitized output uses
//! the same shape plus a `records` array with the candidate lists and the
//! selected replacement per span. Background corpora share the format
//! with an `individual_id` field, and truth files map `doc_id` to
//! `individual_id`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use intact_core::document::{
    AnnotatedDocument, DocumentError, EntityLabel, RawSpan, SanitizedDocument, SelectedRank,
    Strategy,
};
use intact_core::risk::BackgroundEntry;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {detail}")]
    Parse { path: String, line: usize, detail: String },
    #[error("{path}:{line}: document {doc_id}: unknown entity label `{label}`")]
    UnknownLabel { path: String, line: usize, doc_id: String, label: String },
    #[error("{path}:{line}: {source}")]
    Invariant {
        path: String,
        line: usize,
        #[source]
        source: DocumentError,
    },
    #[error("{path}: duplicate doc_id `{doc_id}`")]
    DuplicateDocId { path: String, doc_id: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<AnnotationRecord>,
}

/// Reads and validates an annotated corpus.
pub fn read_corpus(path: &Path) -> Result<Vec<AnnotatedDocument>, CorpusError> {
    let display = path.display().to_string();
    let raw = fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut documents = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: display.clone(),
            line: line_no,
            detail: e.to_string(),
        })?;
        if !seen.insert(record.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId { path: display, doc_id: record.doc_id });
        }
        let mut spans = Vec::with_capacity(record.annotations.len());
        for annotation in &record.annotations {
            let label = EntityLabel::parse(&annotation.label).ok_or_else(|| {
                CorpusError::UnknownLabel {
                    path: display.clone(),
                    line: line_no,
                    doc_id: record.doc_id.clone(),
                    label: annotation.label.clone(),
                }
            })?;
            spans.push(RawSpan {
                start: annotation.start,
                end: annotation.end,
                label,
                entity_id: annotation.entity_id.clone(),
            });
        }
        let document = AnnotatedDocument::new(record.doc_id, record.text, spans)
            .map_err(|source| CorpusError::Invariant { path: display.clone(), line: line_no, source })?;
        documents.push(document);
    }
    Ok(documents)
}

/// Serializes a corpus back to the input format.
pub fn write_corpus(path: &Path, documents: &[AnnotatedDocument]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for doc in documents {
        let record = DocumentRecord {
            doc_id: doc.doc_id.clone(),
            text: doc.text.clone(),
            annotations: doc
                .spans
                .iter()
                .map(|s| AnnotationRecord {
                    start: s.start,
                    end: s.end,
                    label: s.label.as_str().to_string(),
                    entity_id: Some(s.entity_id.clone()),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// `selected_rank` serializes as the integer rank or the string
/// `"FALLBACK"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankField {
    Rank(usize),
    Fallback(String),
}

impl From<SelectedRank> for RankField {
    fn from(rank: SelectedRank) -> RankField {
        match rank {
            SelectedRank::Rank(r) => RankField::Rank(r),
            SelectedRank::Fallback => RankField::Fallback("FALLBACK".to_string()),
        }
    }
}

impl RankField {
    pub fn to_rank(&self) -> Option<SelectedRank> {
        match self {
            RankField::Rank(r) => Some(SelectedRank::Rank(*r)),
            RankField::Fallback(s) if s == "FALLBACK" => Some(SelectedRank::Fallback),
            RankField::Fallback(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplacementOut {
    pub start: usize,
    pub end: usize,
    pub candidates: Vec<String>,
    pub selected: String,
    pub selected_rank: RankField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SanitizedRecordOut {
    pub doc_id: String,
    pub text: String,
    pub strategy: String,
    pub annotations: Vec<AnnotationRecord>,
    pub records: Vec<ReplacementOut>,
}

/// Writes sanitized documents alongside their source annotations.
pub fn write_sanitized(
    path: &Path,
    pairs: &[(&AnnotatedDocument, &SanitizedDocument)],
) -> Result<(), CorpusError> {
    let mut out = String::new();
    for (doc, sanitized) in pairs {
        let record = SanitizedRecordOut {
            doc_id: sanitized.doc_id.clone(),
            text: sanitized.text.clone(),
            strategy: sanitized.strategy.as_str().to_string(),
            annotations: doc
                .spans
                .iter()
                .map(|s| AnnotationRecord {
                    start: s.start,
                    end: s.end,
                    label: s.label.as_str().to_string(),
                    entity_id: Some(s.entity_id.clone()),
                })
                .collect(),
            records: sanitized
                .records
                .iter()
                .map(|r| ReplacementOut {
                    start: r.span.start,
                    end: r.span.end,
                    candidates: r.candidate_list.candidates.clone(),
                    selected: r.selected.clone(),
                    selected_rank: r.selected_rank.into(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Reads a sanitized corpus file.
pub fn read_sanitized(path: &Path) -> Result<Vec<SanitizedRecordOut>, CorpusError> {
    let display = path.display().to_string();
    let raw = fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut records = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SanitizedRecordOut =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                path: display.clone(),
                line: idx + 1,
                detail: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

impl SanitizedRecordOut {
    pub fn strategy_enum(&self) -> Option<Strategy> {
        Strategy::parse(&self.strategy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundRecord {
    pub individual_id: String,
    pub text: String,
}

/// Reads a background-knowledge corpus (one document per individual).
pub fn read_background(path: &Path) -> Result<Vec<BackgroundEntry>, CorpusError> {
    let display = path.display().to_string();
    let raw = fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut entries = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: BackgroundRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                path: display.clone(),
                line: idx + 1,
                detail: e.to_string(),
            })?;
        entries.push(BackgroundEntry { individual_id: record.individual_id, text: record.text });
    }
    Ok(entries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub doc_id: String,
    pub individual_id: String,
}

/// Reads the document-to-individual truth mapping.
pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>, CorpusError> {
    let display = path.display().to_string();
    let raw = fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut records = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TruthRecord = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: display.clone(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes via a temporary file in the same directory, then renames, so
/// output files are never observed half-written.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    let display = path.display().to_string();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default()
    ));
    if tmp == path {
        tmp = dir.join(".intact.tmp");
    }
    let write = |p: &Path| -> std::io::Result<()> {
        let mut f = fs::File::create(p)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    write(&tmp).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    fs::rename(&tmp, path).map_err(|source| CorpusError::Io { path: display, source })
}
