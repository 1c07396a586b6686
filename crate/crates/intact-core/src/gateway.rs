//! Model gateway: request/response types and traits for the three model
//! services the pipeline consumes — chat completion, text embedding and
//! masked-token scoring — plus deterministic mock backends for offline
//! runs and tests.
//!
//! HTTP client implementations live in the companion crate; everything
//! here is transport-agnostic. Embedding vectors are unit-normalized at
//! the gateway so cosine similarity reduces to a dot product.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Chat message roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// Errors shared by every gateway backend.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("model unavailable: {detail}")]
    Unavailable { detail: String },
    #[error("malformed model response: {detail}")]
    ResponseFormat { detail: String },
    #[error("invalid request: {detail}")]
    InvalidRequest { detail: String },
}

impl GatewayError {
    pub fn unavailable(detail: impl Into<String>) -> GatewayError {
        GatewayError::Unavailable { detail: detail.into() }
    }
    pub fn response_format(detail: impl Into<String>) -> GatewayError {
        GatewayError::ResponseFormat { detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_new_tokens: u32,
    /// Correlates responses and log lines to requests.
    pub request_id: u64,
}

impl ChatRequest {
    /// Builds a request, checking that roles alternate starting from user
    /// after any leading system message.
    pub fn new(
        model_id: impl Into<String>,
        messages: Vec<ChatMessage>,
        temperature: f64,
        max_new_tokens: u32,
    ) -> Result<ChatRequest, GatewayError> {
        let body = messages.iter().skip_while(|m| m.role == Role::System);
        let mut expected = Role::User;
        for message in body {
            if message.role != expected {
                return Err(GatewayError::InvalidRequest {
                    detail: String::from("chat roles must alternate user/assistant"),
                });
            }
            expected = if expected == Role::User { Role::Assistant } else { Role::User };
        }
        Ok(ChatRequest {
            model_id: model_id.into(),
            messages,
            temperature,
            max_new_tokens,
            request_id: 0,
        })
    }

    pub fn with_request_id(mut self, id: u64) -> ChatRequest {
        self.request_id = id;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model_id: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    /// One unit-normalized vector per request text, constant dimension.
    pub vectors: Vec<Vec<f64>>,
}

/// A scoring request: `text` contains `positions.len()` occurrences of the
/// sentinel token; position `i` (a character offset of the sentinel start)
/// is scored for `candidates[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskScoreRequest {
    pub model_id: String,
    pub text: String,
    pub sentinel: String,
    pub positions: Vec<usize>,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskScoreResponse {
    /// One probability in (0, 1] per requested position.
    pub probabilities: Vec<f64>,
}

pub trait ChatModel {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError>;
}

pub trait Embedder {
    fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, GatewayError>;
}

pub trait MaskScorer {
    fn mask_score(&self, req: &MaskScoreRequest) -> Result<MaskScoreResponse, GatewayError>;
}

impl<T: ChatModel + ?Sized> ChatModel for &T {
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat(req)
    }
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, GatewayError> {
        (**self).embed(req)
    }
}

impl<T: MaskScorer + ?Sized> MaskScorer for &T {
    fn mask_score(&self, req: &MaskScoreRequest) -> Result<MaskScoreResponse, GatewayError> {
        (**self).mask_score(req)
    }
}

/// Scales a vector to unit length; zero vectors are left unchanged.
pub fn normalize_vector(v: &mut [f64]) {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 1e-12 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Stable fingerprint of a message sequence, used to key scripted replies
/// and to verify byte-identical pass-through.
pub fn prompt_fingerprint(messages: &[ChatMessage]) -> u64 {
    let role = |m: &ChatMessage| match m.role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    };
    crate::util::fnv1a_parts(
        messages.iter().flat_map(|m| [role(m), m.content.as_str()]),
    )
}

pub mod mock {
    //! Deterministic mock backends. Every mock is a pure function of the
    //! request and its construction-time seed/tables, so identical runs
    //! replay identically.

    use alloc::collections::BTreeMap;
    use alloc::string::String;
    use alloc::vec::Vec;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::{
        normalize_vector, prompt_fingerprint, ChatMessage, ChatModel, ChatRequest, EmbedRequest,
        EmbedResponse, Embedder, GatewayError, MaskScoreRequest, MaskScoreResponse, MaskScorer,
    };
    use crate::text::{lemmatize_word, tokenize, Lexicon};
    use crate::util::fnv1a;

    /// Chat mock that replays scripted replies keyed by prompt
    /// fingerprint.
    #[derive(Debug, Clone, Default)]
    pub struct ScriptedChat {
        replies: BTreeMap<u64, String>,
        default_reply: Option<String>,
    }

    impl ScriptedChat {
        pub fn new() -> ScriptedChat {
            ScriptedChat::default()
        }

        /// Registers a reply for an exact message sequence.
        pub fn script(&mut self, messages: &[ChatMessage], reply: impl Into<String>) {
            self.replies.insert(prompt_fingerprint(messages), reply.into());
        }

        /// Reply returned when no script matches.
        pub fn script_default(&mut self, reply: impl Into<String>) {
            self.default_reply = Some(reply.into());
        }
    }

    impl ChatModel for ScriptedChat {
        fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
            self.replies
                .get(&prompt_fingerprint(&req.messages))
                .or(self.default_reply.as_ref())
                .cloned()
                .ok_or_else(|| GatewayError::unavailable("no scripted reply for prompt"))
        }
    }

    /// Chat mock backed by a closure; handy for behavioral scripts that
    /// key off the prompt contents.
    pub struct FnChat<F: Fn(&ChatRequest) -> Result<String, GatewayError>>(pub F);

    impl<F: Fn(&ChatRequest) -> Result<String, GatewayError>> ChatModel for FnChat<F> {
        fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
            (self.0)(req)
        }
    }

    /// Extracts the `[[target]]` of the last user message, which both
    /// prompt templates place there.
    pub fn extract_bracketed_target(messages: &[ChatMessage]) -> Option<&str> {
        let last = messages.iter().rev().find(|m| m.role == super::Role::User)?;
        let start = last.content.rfind("[[")?;
        let rest = &last.content[start + 2..];
        let end = rest.find("]]")?;
        Some(&rest[..end])
    }

    /// Embedder that maps each distinct lowercase lemma multiset to a
    /// deterministic pseudo-random unit vector, with optional per-text
    /// overrides so fixtures can script similarity structure.
    #[derive(Debug, Clone)]
    pub struct HashEmbedder {
        seed: u64,
        dim: usize,
        overrides: BTreeMap<String, Vec<f64>>,
        lexicon: Lexicon,
    }

    impl HashEmbedder {
        pub fn new(seed: u64, dim: usize) -> HashEmbedder {
            HashEmbedder { seed, dim, overrides: BTreeMap::new(), lexicon: Lexicon::builtin() }
        }

        /// Pins the embedding of a specific text (normalized on insert).
        pub fn with_override(mut self, text: &str, vector: Vec<f64>) -> HashEmbedder {
            self.set_override(text, vector);
            self
        }

        pub fn set_override(&mut self, text: &str, mut vector: Vec<f64>) {
            debug_assert_eq!(vector.len(), self.dim);
            normalize_vector(&mut vector);
            self.overrides.insert(self.canonical(text), vector);
        }

        /// Lowercase lemma multiset of the text, sorted and joined, so
        /// inflected variants share one embedding.
        fn canonical(&self, text: &str) -> String {
            let mut lemmas: Vec<String> = tokenize(text)
                .into_iter()
                .map(|t| {
                    let lower: String = t.text.chars().flat_map(char::to_lowercase).collect();
                    lemmatize_word(&lower, &self.lexicon)
                })
                .collect();
            lemmas.sort_unstable();
            lemmas.join("\u{1f}")
        }

        fn vector_for(&self, text: &str) -> Vec<f64> {
            let key = self.canonical(text);
            if let Some(v) = self.overrides.get(&key) {
                return v.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(key.as_bytes()));
            let mut v: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize_vector(&mut v);
            v
        }
    }

    impl Embedder for HashEmbedder {
        fn embed(&self, req: &EmbedRequest) -> Result<EmbedResponse, GatewayError> {
            Ok(EmbedResponse { vectors: req.texts.iter().map(|t| self.vector_for(t)).collect() })
        }
    }

    /// Mask scorer returning configured per-token probabilities, default
    /// 0.5. Keys are lowercase candidate tokens.
    #[derive(Debug, Clone)]
    pub struct ConfiguredScorer {
        table: BTreeMap<String, f64>,
        pub default_probability: f64,
    }

    impl Default for ConfiguredScorer {
        fn default() -> Self {
            ConfiguredScorer { table: BTreeMap::new(), default_probability: 0.5 }
        }
    }

    impl ConfiguredScorer {
        pub fn new() -> ConfiguredScorer {
            ConfiguredScorer::default()
        }

        pub fn with_probability(mut self, token: &str, probability: f64) -> ConfiguredScorer {
            self.set_probability(token, probability);
            self
        }

        pub fn set_probability(&mut self, token: &str, probability: f64) {
            let key: String = token.chars().flat_map(char::to_lowercase).collect();
            self.table.insert(key, probability);
        }
    }

    impl MaskScorer for ConfiguredScorer {
        fn mask_score(&self, req: &MaskScoreRequest) -> Result<MaskScoreResponse, GatewayError> {
            if req.positions.len() != req.candidates.len() {
                return Err(GatewayError::InvalidRequest {
                    detail: String::from("positions and candidates must have equal length"),
                });
            }
            let probabilities = req
                .candidates
                .iter()
                .map(|c| {
                    let key: String = c.chars().flat_map(char::to_lowercase).collect();
                    self.table.get(&key).copied().unwrap_or(self.default_probability)
                })
                .collect();
            Ok(MaskScoreResponse { probabilities })
        }
    }
}
