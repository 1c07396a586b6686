//! Evaluation result files and the merged strategy table.
//!
//! Every `eval-*` command writes one JSON results file carrying the
//! strategy name and whichever metrics that command computed;
//! `intact report` merges any number of these into a single table with
//! one row per strategy and the columns TPS↑, NMI↑ and TRIR↓.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::corpus::atomic_write;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResultsFile {
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmi_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trir: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chance_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacker_model: Option<String>,
    /// Free-form per-document or per-span detail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

pub fn write_results(path: &Path, results: &ResultsFile) -> Result<()> {
    let body = serde_json::to_string_pretty(results).context("results serialization")?;
    atomic_write(path, body.as_bytes())?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<ResultsFile> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read results file {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("invalid results file {}", path.display()))
}

/// Merges results by strategy; later files fill in metrics earlier ones
/// left empty.
pub fn merge_results(files: &[ResultsFile]) -> Vec<ResultsFile> {
    let mut by_strategy: BTreeMap<String, ResultsFile> = BTreeMap::new();
    for file in files {
        let entry = by_strategy.entry(file.strategy.clone()).or_insert_with(|| ResultsFile {
            strategy: file.strategy.clone(),
            ..ResultsFile::default()
        });
        entry.tps = entry.tps.or(file.tps);
        entry.nmi = entry.nmi.or(file.nmi);
        entry.nmi_std = entry.nmi_std.or(file.nmi_std);
        entry.trir = entry.trir.or(file.trir);
        entry.chance_level = entry.chance_level.or(file.chance_level);
        entry.attacker_model = entry.attacker_model.clone().or_else(|| file.attacker_model.clone());
    }
    by_strategy.into_values().collect()
}

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

/// One row per strategy, metrics with their preferred direction.
pub fn render_table(rows: &[ResultsFile]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<16} {:>8} {:>8} {:>8}\n", "strategy", "TPS↑", "NMI↑", "TRIR↓"));
    for row in rows {
        out.push_str(&format!(
            "{:<16} {:>8} {:>8} {:>8}\n",
            row.strategy,
            cell(row.tps),
            cell(row.nmi),
            cell(row.trir),
        ));
    }
    out
}
