//! Core algorithms for truthful text sanitization.
//!
//! A document with annotated PII spans is rewritten in two stages: first a
//! sorted list of generalization candidates is produced for every span
//! (by prompting a chat model, or by heuristic rules for direct identifiers
//! and standard-format dates), then candidates are screened with inference
//! attacks — the model is asked to guess the original span back from the
//! candidate embedded in the partially sanitized document — and the most
//! specific candidate that resists the attack is selected.
//!
//! The crate also carries the annotation-free evaluation suite: information
//! content scoring under an alternating mask schedule, the TPS utility
//! metric, K-means++/NMI clustering comparison, and a linkage-attack
//! re-identification risk estimate.
//!
//! Everything here is pure computation over immutable inputs. Model access
//! goes through the traits in [`gateway`]; deterministic mock backends live
//! in [`gateway::mock`]. IO, file formats, HTTP clients and the CLI live in
//! the companion `intact` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attack;
pub mod document;
pub mod gateway;
pub mod generation;
pub mod metrics;
pub mod pipeline;
pub mod risk;
pub mod text;

mod util;

pub use document::{AnnotatedDocument, EntityLabel, PiiSpan, SanitizedDocument, Strategy};
