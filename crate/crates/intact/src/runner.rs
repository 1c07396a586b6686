//! Corpus-level orchestration: documents are sanitized in parallel by a
//! bounded worker pool (documents are independent; within one document
//! the pipeline is strictly sequential). Results keep corpus order, so
//! runs are byte-identical regardless of worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Result};

use intact_core::document::{AnnotatedDocument, SanitizedDocument, Strategy};
use intact_core::generation::PromptBundle;
use intact_core::pipeline::{generate_candidates, sanitize, sanitize_baseline, PipelineConfig};
use intact_core::text::Lexicon;

use crate::backend::Backends;

/// Sanitizes a corpus under the configured strategy.
///
/// `INTACT` runs the full two-stage pipeline; `SUPPRESSION` and
/// `ENTITY_TYPE` need no model; the least/most-specific variants generate
/// candidates first and then pick an end of each list.
pub fn sanitize_corpus(
    documents: &[AnnotatedDocument],
    cfg: &PipelineConfig,
    backends: &Backends,
    workers: usize,
) -> Result<Vec<SanitizedDocument>> {
    let bundle = PromptBundle::builtin();
    let lexicon = Lexicon::builtin();
    let worker_count = workers.clamp(1, documents.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SanitizedDocument>>> =
        Mutex::new((0..documents.len()).map(|_| None).collect());
    let failure: Mutex<Option<anyhow::Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= documents.len() {
                    break;
                }
                if failure.lock().expect("lock").is_some() {
                    break;
                }
                let doc = &documents[index];
                let outcome = sanitize_one(doc, cfg, backends, &bundle, &lexicon);
                match outcome {
                    Ok(sanitized) => {
                        results.lock().expect("lock")[index] = Some(sanitized);
                    }
                    Err(e) => {
                        let mut slot = failure.lock().expect("lock");
                        if slot.is_none() {
                            *slot = Some(e);
                        }
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    let collected = results.into_inner().expect("lock");
    collected
        .into_iter()
        .enumerate()
        .map(|(i, slot)| slot.ok_or_else(|| anyhow!("document {i} was not processed")))
        .collect()
}

fn sanitize_one(
    doc: &AnnotatedDocument,
    cfg: &PipelineConfig,
    backends: &Backends,
    bundle: &PromptBundle,
    lexicon: &Lexicon,
) -> Result<SanitizedDocument> {
    let out = match cfg.strategy {
        Strategy::Intact => sanitize(doc, cfg, &*backends.chat, bundle, lexicon)?,
        Strategy::Suppression | Strategy::EntityType => {
            sanitize_baseline(doc, cfg.strategy, None)?
        }
        Strategy::LeastSpecific | Strategy::MostSpecific => {
            let outcome = generate_candidates(doc, cfg, &*backends.chat, bundle, lexicon)?;
            sanitize_baseline(doc, cfg.strategy, Some(&outcome.lists))?
        }
    };
    log::info!("sanitized {} ({} spans, strategy {})", out.doc_id, out.records.len(), cfg.strategy);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::build_backends;
    use crate::config::AppConfig;
    use intact_core::document::{EntityLabel, RawSpan};

    fn corpus(n: usize) -> Vec<AnnotatedDocument> {
        (0..n)
            .map(|i| {
                let person = format!("Person{i}");
                let place = format!("Quorfel{i}");
                let text = format!("{person} visited {place} today.");
                let place_start = text.find(&place).unwrap();
                AnnotatedDocument::new(
                    format!("doc{i}"),
                    text,
                    vec![
                        RawSpan {
                            start: 0,
                            end: person.len(),
                            label: EntityLabel::Person,
                            entity_id: None,
                        },
                        RawSpan {
                            start: place_start,
                            end: place_start + place.len(),
                            label: EntityLabel::Loc,
                            entity_id: None,
                        },
                    ],
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let docs = corpus(6);
        let cfg = AppConfig::default();
        let backends = build_backends(&cfg).unwrap();
        let pipeline = cfg.pipeline_config();
        let serial = sanitize_corpus(&docs, &pipeline, &backends, 1).unwrap();
        let parallel = sanitize_corpus(&docs, &pipeline, &backends, 4).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 6);
    }

    #[test]
    fn suppression_runs_without_model_calls() {
        let docs = corpus(2);
        let cfg = AppConfig::default();
        let backends = build_backends(&cfg).unwrap();
        let pipeline =
            PipelineConfig { strategy: Strategy::Suppression, ..cfg.pipeline_config() };
        let out = sanitize_corpus(&docs, &pipeline, &backends, 2).unwrap();
        assert!(out.iter().all(|d| d.strategy == Strategy::Suppression));
    }
}
