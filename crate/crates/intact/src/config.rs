//! Run configuration: one TOML file carrying every tunable with its
//! default value, so a run is reproducible from the file alone. Gateway
//! endpoints can be overridden through `INTACT_CHAT_URL`,
//! `INTACT_EMBED_URL`, `INTACT_SCORE_URL` and `INTACT_API_KEY`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use intact_core::attack::AttackConfig;
use intact_core::generation::GenerationConfig;
use intact_core::metrics::{ClusteringConfig, MaskScoringConfig};
use intact_core::pipeline::PipelineConfig;
use intact_core::risk::AttackerConfig;
use intact_core::text::MatchConfig;
use intact_core::Strategy;

/// A commented copy of the default configuration, emitted by
/// `intact init-config`. Parsing it yields exactly [`AppConfig::default`].
pub const DEFAULT_CONFIG_TOML: &str = include_str!("resources/default-config.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub pipeline: PipelineSection,
    pub generation: GenerationSection,
    pub attack: AttackSection,
    pub matching: MatchingSection,
    pub scoring: ScoringSection,
    pub embedding: EmbeddingSection,
    pub clustering: ClusteringSection,
    pub risk: RiskSection,
    pub gateway: GatewaySection,
    pub logging: LoggingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub strategy: String,
    pub early_exit: bool,
    pub rng_seed: u64,
    pub workers: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection { strategy: "intact".into(), early_exit: true, rng_seed: 42, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSection {
    pub m: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub model_id: String,
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            m: 5,
            temperature: 0.3,
            max_new_tokens: 512,
            model_id: "mistral-7b-instruct".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub p: usize,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub model_id: String,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            p: 5,
            temperature: 0.3,
            max_new_tokens: 512,
            model_id: "mistral-7b-instruct".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingSection {
    pub ngram_n: usize,
    pub high_freq_rank_cutoff: usize,
    pub stopword_list_id: String,
}

impl Default for MatchingSection {
    fn default() -> Self {
        let cfg = MatchConfig::default();
        MatchingSection {
            ngram_n: cfg.ngram_n,
            high_freq_rank_cutoff: cfg.high_freq_rank_cutoff,
            stopword_list_id: cfg.stopword_list_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringSection {
    pub spacing: usize,
    pub mask_sentinel: String,
    pub model_id: String,
}

impl Default for ScoringSection {
    fn default() -> Self {
        ScoringSection { spacing: 6, mask_sentinel: "[MASK]".into(), model_id: "mask-scorer".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSection {
    pub model_id: String,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection { model_id: "sentence-embedder".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringSection {
    pub k: usize,
    pub restarts: usize,
    pub nmi_runs: usize,
    pub max_iterations: usize,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        ClusteringSection { k: 4, restarts: 50, nmi_runs: 5, max_iterations: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskSection {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub plateau_tolerance: f64,
    pub patience: usize,
    /// Fraction of each background text kept (1.0 keeps everything).
    pub background_truncation: f64,
}

impl Default for RiskSection {
    fn default() -> Self {
        RiskSection {
            learning_rate: 0.5,
            l2: 1e-4,
            max_epochs: 500,
            plateau_tolerance: 1e-6,
            patience: 10,
            background_truncation: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    /// `mock` for the deterministic offline backends, `http` for
    /// OpenAI-compatible servers.
    pub backend: String,
    pub chat_url: String,
    pub embed_url: String,
    pub score_url: String,
    pub api_key: String,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub mock_seed: u64,
    pub mock_embed_dim: usize,
}

impl Default for GatewaySection {
    fn default() -> Self {
        GatewaySection {
            backend: "mock".into(),
            chat_url: String::new(),
            embed_url: String::new(),
            score_url: String::new(),
            api_key: String::new(),
            retries: 2,
            backoff_ms: 100,
            timeout_secs: 60,
            mock_seed: 7,
            mock_embed_dim: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoggingSection {
    /// Log request/response body hashes instead of contents.
    pub redact_bodies: bool,
}

impl Default for LoggingSection {
    fn default() -> Self {
        LoggingSection { redact_bodies: true }
    }
}

impl AppConfig {
    /// Loads a config file, applies environment overrides and validates.
    pub fn load(path: &Path) -> Result<AppConfig> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut config: AppConfig = toml::from_str(&raw)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        config.apply_env_overrides();
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env_overrides(&mut self) {
        for (var, slot) in [
            ("INTACT_CHAT_URL", &mut self.gateway.chat_url),
            ("INTACT_EMBED_URL", &mut self.gateway.embed_url),
            ("INTACT_SCORE_URL", &mut self.gateway.score_url),
            ("INTACT_API_KEY", &mut self.gateway.api_key),
        ] {
            if let Ok(value) = std::env::var(var) {
                if !value.is_empty() {
                    *slot = value;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if Strategy::parse(&self.pipeline.strategy).is_none() {
            bail!(
                "pipeline.strategy: unknown strategy `{}` (expected intact, suppression, \
                 entity_type, least_specific or most_specific)",
                self.pipeline.strategy
            );
        }
        match self.gateway.backend.as_str() {
            "mock" => {}
            "http" => {
                for (field, value) in [
                    ("gateway.chat_url", &self.gateway.chat_url),
                    ("gateway.embed_url", &self.gateway.embed_url),
                    ("gateway.score_url", &self.gateway.score_url),
                ] {
                    if value.is_empty() {
                        bail!("{field} is required when gateway.backend = \"http\"");
                    }
                }
            }
            other => bail!("gateway.backend: expected `mock` or `http`, got `{other}`"),
        }
        if self.generation.m == 0 {
            bail!("generation.m must be at least 1");
        }
        if self.scoring.spacing < 2 {
            bail!("scoring.spacing must be at least 2");
        }
        if self.clustering.restarts == 0 || self.clustering.nmi_runs == 0 {
            bail!("clustering.restarts and clustering.nmi_runs must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.risk.background_truncation) {
            bail!("risk.background_truncation must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        Strategy::parse(&self.pipeline.strategy).expect("validated")
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            generation: GenerationConfig {
                m: self.generation.m,
                temperature: self.generation.temperature,
                max_new_tokens: self.generation.max_new_tokens,
                model_id: self.generation.model_id.clone(),
            },
            attack: AttackConfig {
                p: self.attack.p,
                temperature: self.attack.temperature,
                max_new_tokens: self.attack.max_new_tokens,
                model_id: self.attack.model_id.clone(),
            },
            matching: MatchConfig {
                ngram_n: self.matching.ngram_n,
                high_freq_rank_cutoff: self.matching.high_freq_rank_cutoff,
                stopword_list_id: self.matching.stopword_list_id.clone(),
            },
            strategy: self.strategy(),
            early_exit: self.pipeline.early_exit,
            rng_seed: self.pipeline.rng_seed,
        }
    }

    pub fn scoring_config(&self) -> MaskScoringConfig {
        MaskScoringConfig {
            spacing: self.scoring.spacing,
            mask_sentinel: self.scoring.mask_sentinel.clone(),
            model_id: self.scoring.model_id.clone(),
        }
    }

    pub fn clustering_config(&self) -> ClusteringConfig {
        ClusteringConfig {
            k: self.clustering.k,
            restarts: self.clustering.restarts,
            nmi_runs: self.clustering.nmi_runs,
            max_iterations: self.clustering.max_iterations,
            rng_seed: self.pipeline.rng_seed,
        }
    }

    pub fn attacker_config(&self) -> AttackerConfig {
        AttackerConfig {
            learning_rate: self.risk.learning_rate,
            l2: self.risk.l2,
            max_epochs: self.risk.max_epochs,
            plateau_tolerance: self.risk.plateau_tolerance,
            patience: self.risk.patience,
            seed: self.pipeline.rng_seed,
            embed_model_id: self.embedding.model_id.clone(),
        }
    }
}
