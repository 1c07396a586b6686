//! Run manifests: enough provenance to reproduce a run bit-for-bit with
//! the mock backends — the full config, seeds, model ids, input file
//! hashes and timings. Written next to every output file as
//! `<output>.manifest.json`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::AppConfig;
use crate::corpus::atomic_write;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: AppConfig,
    pub rng_seed: u64,
    pub mock_seed: u64,
    pub model_ids: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot hash input {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub struct ManifestBuilder {
    command: String,
    config: AppConfig,
    inputs: Vec<InputDigest>,
    outputs: Vec<PathBuf>,
    started: std::time::Instant,
    started_unix_ms: u128,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: &AppConfig) -> ManifestBuilder {
        ManifestBuilder {
            command: command.to_string(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: std::time::Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .push(InputDigest { path: path.display().to_string(), sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `<primary_output>.manifest.json`.
    pub fn write(self, primary_output: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            tool: "intact".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            rng_seed: self.config.pipeline.rng_seed,
            mock_seed: self.config.gateway.mock_seed,
            model_ids: vec![
                self.config.generation.model_id.clone(),
                self.config.attack.model_id.clone(),
                self.config.scoring.model_id.clone(),
                self.config.embedding.model_id.clone(),
            ],
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            started_unix_ms: self.started_unix_ms,
            elapsed_ms: self.started.elapsed().as_millis(),
        };
        let mut name = primary_output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let body = serde_json::to_string_pretty(&manifest).context("manifest serialization")?;
        atomic_write(&path, body.as_bytes())?;
        Ok(path)
    }
}
