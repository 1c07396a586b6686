//! Re-identification risk: simulate a linkage attack against sanitized
//! documents.
//!
//! A multinomial logistic-regression classifier is trained over frozen
//! document embeddings of one background document per individual in the
//! population. TRIR is the fraction of sanitized documents whose
//! predicted individual equals the true one; the chance level `1/P` is
//! reported alongside for interpretation.
//!
//! The attacker is a declared weakening of a fine-tuned language-model
//! classifier: embeddings are frozen, only the linear head is trained.
//! Reports carry the attacker label so results are never mistaken for the
//! stronger adversary.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gateway::Embedder;
use crate::metrics::{document_embedding, MetricsError};

/// What the attacker is, recorded in every report.
pub const ATTACKER_MODEL: &str = "multinomial-logistic-regression(frozen-embeddings)";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RiskError {
    #[error("degenerate corpus: {detail}")]
    DegenerateCorpus { detail: String },
    #[error("individual `{individual_id}` is not in the attacker's population")]
    UnknownIndividual { individual_id: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One public background document per individual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundEntry {
    pub individual_id: String,
    pub text: String,
}

/// The attacker's background knowledge: a population of individuals that
/// encompasses the protected ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackgroundCorpus {
    entries: Vec<BackgroundEntry>,
}

impl BackgroundCorpus {
    /// Validates that individual ids are unique.
    pub fn new(entries: Vec<BackgroundEntry>) -> Result<BackgroundCorpus, RiskError> {
        let mut seen = alloc::collections::BTreeSet::new();
        for entry in &entries {
            if !seen.insert(entry.individual_id.clone()) {
                return Err(RiskError::DegenerateCorpus {
                    detail: alloc::format!("duplicate individual `{}`", entry.individual_id),
                });
            }
        }
        Ok(BackgroundCorpus { entries })
    }

    pub fn entries(&self) -> &[BackgroundEntry] {
        &self.entries
    }

    /// Population size `P`.
    pub fn population(&self) -> usize {
        self.entries.len()
    }
}

/// Builds a background: the protected individuals plus an equal number of
/// decoys sampled (seeded, without replacement) from a pool. Texts are
/// optionally truncated to their first `truncation` fraction of
/// characters.
pub fn build_background(
    protected: &[BackgroundEntry],
    decoy_pool: &[BackgroundEntry],
    truncation: Option<f64>,
    seed: u64,
) -> Result<BackgroundCorpus, RiskError> {
    let wanted = protected.len();
    if decoy_pool.len() < wanted {
        return Err(RiskError::DegenerateCorpus {
            detail: alloc::format!("decoy pool holds {} < {wanted} entries", decoy_pool.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..decoy_pool.len()).collect();
    // Partial Fisher-Yates: the first `wanted` slots become the sample.
    for i in 0..wanted {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let truncate = |text: &str| -> String {
        match truncation {
            Some(fraction) if fraction < 1.0 => {
                let keep =
                    (libm::ceil(text.chars().count() as f64 * fraction) as usize).max(1);
                text.chars().take(keep).collect()
            }
            _ => text.to_string(),
        }
    };
    let mut entries: Vec<BackgroundEntry> = Vec::with_capacity(wanted * 2);
    for entry in protected {
        entries.push(BackgroundEntry {
            individual_id: entry.individual_id.clone(),
            text: truncate(&entry.text),
        });
    }
    for &i in indices.iter().take(wanted) {
        entries.push(BackgroundEntry {
            individual_id: decoy_pool[i].individual_id.clone(),
            text: truncate(&decoy_pool[i].text),
        });
    }
    BackgroundCorpus::new(entries)
}

/// Attacker training parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    /// Loss-change threshold under which an epoch counts toward the
    /// plateau.
    pub plateau_tolerance: f64,
    /// Consecutive plateau epochs before training stops.
    pub patience: usize,
    pub seed: u64,
    pub embed_model_id: String,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            learning_rate: 0.5,
            l2: 1e-4,
            max_epochs: 500,
            plateau_tolerance: 1e-6,
            patience: 10,
            seed: 42,
            embed_model_id: String::from("default-embedder"),
        }
    }
}

/// Trained linkage attacker: a softmax classifier over frozen document
/// embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageAttacker {
    /// Individual ids, sorted; prediction ties resolve to the lowest.
    pub classes: Vec<String>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    pub embed_model_id: String,
    pub final_loss: f64,
    pub epochs_run: usize,
}

impl LinkageAttacker {
    fn logits(&self, v: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(v).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect()
    }

    /// Index of the argmax class; exact ties go to the lowest
    /// individual id (classes are sorted).
    pub fn predict_index(&self, v: &[f64]) -> usize {
        let logits = self.logits(v);
        let mut best = 0usize;
        for (i, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn predict(&self, v: &[f64]) -> &str {
        &self.classes[self.predict_index(v)]
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in z.iter_mut() {
        *x = libm::exp(*x - max);
        total += *x;
    }
    for x in z.iter_mut() {
        *x /= total;
    }
}

/// Trains the linkage attacker on a background corpus.
///
/// Full-batch gradient descent with L2 regularization from a small seeded
/// initialization, run until the loss plateaus or `max_epochs`. The loss
/// is convex, so the result is deterministic given the seed.
pub fn train_attacker(
    background: &BackgroundCorpus,
    embedder: &dyn Embedder,
    cfg: &AttackerConfig,
) -> Result<LinkageAttacker, RiskError> {
    if background.population() < 2 {
        return Err(RiskError::DegenerateCorpus {
            detail: String::from("need at least two individuals"),
        });
    }
    let mut classes: Vec<String> =
        background.entries.iter().map(|e| e.individual_id.clone()).collect();
    classes.sort_unstable();

    let mut features: Vec<Vec<f64>> = Vec::with_capacity(background.entries.len());
    let mut labels: Vec<usize> = Vec::with_capacity(background.entries.len());
    for entry in &background.entries {
        features.push(document_embedding(&entry.text, embedder, &cfg.embed_model_id)?);
        labels.push(classes.binary_search(&entry.individual_id).expect("id is a class"));
    }
    let dim = features[0].len();
    let n = features.len();
    let c = classes.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights: Vec<Vec<f64>> =
        (0..c).map(|_| (0..dim).map(|_| rng.random_range(-1e-3..1e-3)).collect()).collect();
    let mut bias = alloc::vec![0.0f64; c];

    let mut previous_loss = f64::INFINITY;
    let mut plateau = 0usize;
    let mut epochs_run = 0usize;
    let mut final_loss = 0.0f64;
    for epoch in 0..cfg.max_epochs {
        let mut grad_w = alloc::vec![alloc::vec![0.0f64; dim]; c];
        let mut grad_b = alloc::vec![0.0f64; c];
        let mut loss = 0.0f64;
        for (x, &y) in features.iter().zip(&labels) {
            let mut p: Vec<f64> = (0..c)
                .map(|k| {
                    weights[k].iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + bias[k]
                })
                .collect();
            softmax_in_place(&mut p);
            loss -= libm::log(p[y].max(1e-300));
            for k in 0..c {
                let delta = p[k] - if k == y { 1.0 } else { 0.0 };
                for (g, xi) in grad_w[k].iter_mut().zip(x) {
                    *g += delta * xi;
                }
                grad_b[k] += delta;
            }
        }
        loss /= n as f64;
        let mut reg = 0.0f64;
        for row in &weights {
            reg += row.iter().map(|w| w * w).sum::<f64>();
        }
        loss += 0.5 * cfg.l2 * reg;

        for k in 0..c {
            for (w, g) in weights[k].iter_mut().zip(&grad_w[k]) {
                *w -= cfg.learning_rate * (g / n as f64 + cfg.l2 * *w);
            }
            bias[k] -= cfg.learning_rate * grad_b[k] / n as f64;
        }

        epochs_run = epoch + 1;
        final_loss = loss;
        if (previous_loss - loss).abs() < cfg.plateau_tolerance {
            plateau += 1;
            if plateau >= cfg.patience {
                break;
            }
        } else {
            plateau = 0;
        }
        previous_loss = loss;
    }

    Ok(LinkageAttacker {
        classes,
        weights,
        bias,
        embed_model_id: cfg.embed_model_id.clone(),
        final_loss,
        epochs_run,
    })
}

/// A sanitized document paired with the individual it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedDocument {
    pub doc_id: String,
    pub text: String,
    pub individual_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVerdict {
    pub doc_id: String,
    pub truth: String,
    pub predicted: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Re-identification accuracy over the sanitized documents.
    pub trir: f64,
    /// `1/P`: what an attacker guessing uniformly would score.
    pub chance_level: f64,
    pub population: usize,
    pub attacker_model: String,
    pub documents: Vec<DocVerdict>,
}

/// Runs the linkage attack over sanitized documents.
pub fn trir(
    documents: &[ProtectedDocument],
    attacker: &LinkageAttacker,
    embedder: &dyn Embedder,
) -> Result<RiskReport, RiskError> {
    if documents.is_empty() {
        return Err(RiskError::DegenerateCorpus { detail: String::from("no documents to attack") });
    }
    let mut verdicts = Vec::with_capacity(documents.len());
    let mut correct = 0usize;
    for document in documents {
        if attacker.classes.binary_search(&document.individual_id).is_err() {
            return Err(RiskError::UnknownIndividual {
                individual_id: document.individual_id.clone(),
            });
        }
        let v = document_embedding(&document.text, embedder, &attacker.embed_model_id)?;
        let predicted = attacker.predict(&v).to_string();
        let hit = predicted == document.individual_id;
        correct += usize::from(hit);
        verdicts.push(DocVerdict {
            doc_id: document.doc_id.clone(),
            truth: document.individual_id.clone(),
            predicted,
            correct: hit,
        });
    }
    Ok(RiskReport {
        trir: correct as f64 / documents.len() as f64,
        chance_level: 1.0 / attacker.classes.len() as f64,
        population: attacker.classes.len(),
        attacker_model: String::from(ATTACKER_MODEL),
        documents: verdicts,
    })
}
