//! Command-line interface: sanitize a corpus, evaluate utility (TPS,
//! clustering NMI) and re-identification risk (TRIR), merge result files
//! into one table, serve the mock model server, or print the default
//! config. Logs go to standard error; data only ever goes to files (or
//! stdout for `report`/`init-config` when no output path is given).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use intact_core::document::{SanitizedDocument, SelectedRank, SpanRef, Strategy};
use intact_core::metrics::{clustering_utility, document_embedding, document_tps};
use intact_core::pipeline::selection_statistics;
use intact_core::risk::{train_attacker, trir, BackgroundCorpus, ProtectedDocument};

use crate::backend::build_backends;
use crate::config::{AppConfig, DEFAULT_CONFIG_TOML};
use crate::corpus;
use crate::manifest::ManifestBuilder;
use crate::mock_server::MockModelServer;
use crate::report::{merge_results, read_results, render_table, write_results, ResultsFile};
use crate::runner::sanitize_corpus;

#[derive(Parser)]
#[command(
    name = "intact",
    version,
    about = "Truthful text sanitization guided by inference attacks, with annotation-free utility and risk evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sanitize an annotated corpus under a replacement strategy.
    Sanitize(SanitizeArgs),
    /// Compute Text Preserved Similarity between a corpus and its sanitized version.
    EvalTps(EvalTpsArgs),
    /// Compare document clusterings before and after sanitization (NMI).
    EvalCluster(EvalClusterArgs),
    /// Estimate re-identification risk with a linkage attacker.
    EvalTrir(EvalTrirArgs),
    /// Merge evaluation result files into one table per strategy.
    Report(ReportArgs),
    /// Serve the deterministic mock model server over HTTP.
    ServeMock(ServeMockArgs),
    /// Print the default configuration file.
    InitConfig(InitConfigArgs),
}

#[derive(Args)]
struct SanitizeArgs {
    /// Annotated corpus (JSON lines).
    #[arg(long)]
    corpus: PathBuf,
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replacement strategy (overrides the config).
    #[arg(long)]
    strategy: Option<String>,
    /// Output file for the sanitized corpus.
    #[arg(long)]
    out: PathBuf,
    /// Parallel document workers (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write selected-rank statistics next to the output.
    #[arg(long)]
    stats: bool,
}

#[derive(Args)]
struct EvalTpsArgs {
    /// The original annotated corpus.
    #[arg(long)]
    original: PathBuf,
    /// The sanitized corpus produced by `sanitize`.
    #[arg(long)]
    sanitized: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Results file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalClusterArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    sanitized: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also report best-of-restarts inertia on the original corpus for
    /// k in 2..=10, for choosing k.
    #[arg(long)]
    sweep_k: bool,
}

#[derive(Args)]
struct EvalTrirArgs {
    /// Background knowledge corpus (JSON lines with individual_id).
    #[arg(long)]
    background: PathBuf,
    #[arg(long)]
    sanitized: PathBuf,
    /// Truth file mapping doc_id to individual_id.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Result files produced by the eval commands.
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeMockArgs {
    /// Bind address.
    #[arg(long, default_value = "127.0.0.1:8088")]
    addr: String,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct InitConfigArgs {
    /// Write the template here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sanitize(args) => cmd_sanitize(args),
        Command::EvalTps(args) => cmd_eval_tps(args),
        Command::EvalCluster(args) => cmd_eval_cluster(args),
        Command::EvalTrir(args) => cmd_eval_trir(args),
        Command::Report(args) => cmd_report(args),
        Command::ServeMock(args) => cmd_serve_mock(args),
        Command::InitConfig(args) => cmd_init_config(args),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<AppConfig> {
    match path {
        Some(p) => AppConfig::load(p),
        None => {
            let mut cfg = AppConfig::default();
            cfg.apply_env_overrides();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn cmd_sanitize(args: SanitizeArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(strategy) = &args.strategy {
        if Strategy::parse(strategy).is_none() {
            bail!("--strategy: unknown strategy `{strategy}`");
        }
        config.pipeline.strategy = strategy.clone();
    }
    if let Some(workers) = args.workers {
        config.pipeline.workers = workers.max(1);
    }
    let mut manifest = ManifestBuilder::new("sanitize", &config);
    manifest.input(&args.corpus)?;

    let documents = corpus::read_corpus(&args.corpus)?;
    let backends = build_backends(&config)?;
    let pipeline = config.pipeline_config();
    let sanitized = sanitize_corpus(&documents, &pipeline, &backends, config.pipeline.workers)?;

    let pairs: Vec<_> = documents.iter().zip(sanitized.iter()).collect();
    corpus::write_sanitized(&args.out, &pairs)?;
    manifest.output(&args.out);

    if args.stats {
        let stats = selection_statistics(&sanitized, pipeline.generation.m);
        let stats_path = args.out.with_extension("stats.json");
        corpus::atomic_write(&stats_path, serde_json::to_string_pretty(&stats)?.as_bytes())?;
        manifest.output(&stats_path);
        log::info!("selection statistics:\n{}", stats.render_table());
    }

    let manifest_path = manifest.write(&args.out)?;
    log::info!(
        "sanitized {} documents with strategy {} -> {} (manifest {})",
        documents.len(),
        pipeline.strategy,
        args.out.display(),
        manifest_path.display()
    );
    Ok(())
}

/// Pairs sanitized file records with their original documents and
/// rebuilds core sanitized documents for the metric functions.
fn pair_sanitized(
    original_path: &Path,
    sanitized_path: &Path,
) -> Result<Vec<(intact_core::AnnotatedDocument, SanitizedDocument)>> {
    let originals = corpus::read_corpus(original_path)?;
    let sanitized = corpus::read_sanitized(sanitized_path)?;
    let by_id: BTreeMap<&str, &corpus::SanitizedRecordOut> =
        sanitized.iter().map(|r| (r.doc_id.as_str(), r)).collect();
    let mut pairs = Vec::with_capacity(originals.len());
    for doc in originals {
        let record = by_id
            .get(doc.doc_id.as_str())
            .ok_or_else(|| anyhow!("{}: no sanitized record for doc_id", doc.doc_id))?;
        let strategy = record
            .strategy_enum()
            .ok_or_else(|| anyhow!("{}: unknown strategy `{}`", doc.doc_id, record.strategy))?;
        if record.records.len() != doc.spans.len() {
            bail!(
                "{}: sanitized file has {} records for {} spans",
                doc.doc_id,
                record.records.len(),
                doc.spans.len()
            );
        }
        let mut records = Vec::with_capacity(record.records.len());
        for (i, span) in doc.spans.iter().enumerate() {
            let out = &record.records[i];
            if out.start != span.start || out.end != span.end {
                bail!(
                    "{}: record {i} covers [{},{}) but the span is [{},{})",
                    doc.doc_id,
                    out.start,
                    out.end,
                    span.start,
                    span.end
                );
            }
            records.push(intact_core::document::ReplacementRecord {
                span: SpanRef::of(&doc, i),
                candidate_list: intact_core::document::CandidateList {
                    span_index: i,
                    candidates: out.candidates.clone(),
                    source: intact_core::document::CandidateSource::Llm,
                },
                guess_sets: Vec::new(),
                selected: out.selected.clone(),
                selected_rank: out
                    .selected_rank
                    .to_rank()
                    .ok_or_else(|| anyhow!("{}: bad selected_rank in record {i}", doc.doc_id))?,
                fallback_label: match out.selected_rank.to_rank() {
                    Some(SelectedRank::Fallback) => Some(out.selected.clone()),
                    _ => None,
                },
            });
        }
        let core_doc = SanitizedDocument {
            doc_id: record.doc_id.clone(),
            text: record.text.clone(),
            records,
            strategy,
        };
        pairs.push((doc, core_doc));
    }
    Ok(pairs)
}

fn strategy_of(pairs: &[(intact_core::AnnotatedDocument, SanitizedDocument)]) -> String {
    pairs.first().map(|(_, s)| s.strategy.as_str().to_string()).unwrap_or_default()
}

fn cmd_eval_tps(args: EvalTpsArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let mut manifest = ManifestBuilder::new("eval-tps", &config);
    manifest.input(&args.original)?;
    manifest.input(&args.sanitized)?;

    let pairs = pair_sanitized(&args.original, &args.sanitized)?;
    if pairs.is_empty() {
        bail!("empty corpus");
    }
    let backends = build_backends(&config)?;
    let scoring = config.scoring_config();
    let lexicon = intact_core::text::Lexicon::builtin();

    let mut per_doc = Vec::with_capacity(pairs.len());
    let mut total = 0.0f64;
    for (doc, sanitized) in &pairs {
        let report = document_tps(
            doc,
            sanitized,
            &*backends.scorer,
            &*backends.embedder,
            &scoring,
            &config.embedding.model_id,
            &lexicon,
        )?;
        total += report.tps;
        per_doc.push(serde_json::json!({"doc_id": report.doc_id, "tps": report.tps}));
    }
    let mean = total / pairs.len() as f64;

    let results = ResultsFile {
        strategy: strategy_of(&pairs),
        tps: Some(mean),
        details: Some(serde_json::json!({"per_document": per_doc})),
        ..Default::default()
    };
    write_results(&args.out, &results)?;
    manifest.output(&args.out);
    manifest.write(&args.out)?;
    log::info!("TPS({}) = {:.4} over {} documents", results.strategy, mean, pairs.len());
    Ok(())
}

fn cmd_eval_cluster(args: EvalClusterArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let mut manifest = ManifestBuilder::new("eval-cluster", &config);
    manifest.input(&args.original)?;
    manifest.input(&args.sanitized)?;

    let pairs = pair_sanitized(&args.original, &args.sanitized)?;
    if pairs.is_empty() {
        bail!("empty corpus");
    }
    let backends = build_backends(&config)?;
    let mut original_vectors = Vec::with_capacity(pairs.len());
    let mut sanitized_vectors = Vec::with_capacity(pairs.len());
    for (doc, sanitized) in &pairs {
        original_vectors.push(document_embedding(
            &doc.text,
            &*backends.embedder,
            &config.embedding.model_id,
        )?);
        sanitized_vectors.push(document_embedding(
            &sanitized.text,
            &*backends.embedder,
            &config.embedding.model_id,
        )?);
    }
    let clustering = config.clustering_config();
    let report = clustering_utility(&original_vectors, &sanitized_vectors, &clustering)?;

    let mut details = serde_json::json!({"runs": report.runs});
    if args.sweep_k {
        // Inertia on the original corpus over a range of k, the way the
        // cluster count is chosen in the first place.
        let mut sweep = Vec::new();
        for k in 2..=10usize.min(original_vectors.len()) {
            let outcome = intact_core::metrics::kmeanspp_cluster(
                &original_vectors,
                k,
                clustering.restarts,
                clustering.max_iterations,
                clustering.rng_seed,
            )?;
            sweep.push(serde_json::json!({"k": k, "inertia": outcome.inertia}));
        }
        details["k_sweep"] = serde_json::Value::Array(sweep);
    }

    let results = ResultsFile {
        strategy: strategy_of(&pairs),
        nmi: Some(report.mean_nmi),
        nmi_std: Some(report.std_dev),
        details: Some(details),
        ..Default::default()
    };
    write_results(&args.out, &results)?;
    manifest.output(&args.out);
    manifest.write(&args.out)?;
    log::info!(
        "NMI({}) = {:.4} ± {:.4} over {} runs",
        results.strategy,
        report.mean_nmi,
        report.std_dev,
        report.runs.len()
    );
    Ok(())
}

fn cmd_eval_trir(args: EvalTrirArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let mut manifest = ManifestBuilder::new("eval-trir", &config);
    manifest.input(&args.background)?;
    manifest.input(&args.sanitized)?;
    manifest.input(&args.truth)?;

    let background_entries = corpus::read_background(&args.background)?;
    let background = BackgroundCorpus::new(truncated(background_entries, &config))?;
    let sanitized = corpus::read_sanitized(&args.sanitized)?;
    let truth = corpus::read_truth(&args.truth)?;
    let truth_by_doc: BTreeMap<&str, &str> =
        truth.iter().map(|t| (t.doc_id.as_str(), t.individual_id.as_str())).collect();

    let mut documents = Vec::with_capacity(sanitized.len());
    let mut strategy = String::new();
    for record in &sanitized {
        let individual = truth_by_doc
            .get(record.doc_id.as_str())
            .ok_or_else(|| anyhow!("{}: no truth entry for doc_id", record.doc_id))?;
        documents.push(ProtectedDocument {
            doc_id: record.doc_id.clone(),
            text: record.text.clone(),
            individual_id: (*individual).to_string(),
        });
        strategy = record.strategy.clone();
    }

    let backends = build_backends(&config)?;
    let attacker = train_attacker(&background, &*backends.embedder, &config.attacker_config())?;
    let report = trir(&documents, &attacker, &*backends.embedder)?;

    let results = ResultsFile {
        strategy,
        trir: Some(report.trir),
        chance_level: Some(report.chance_level),
        attacker_model: Some(report.attacker_model.clone()),
        details: Some(serde_json::json!({
            "population": report.population,
            "per_document": report
                .documents
                .iter()
                .map(|d| serde_json::json!({
                    "doc_id": d.doc_id,
                    "truth": d.truth,
                    "predicted": d.predicted,
                    "correct": d.correct,
                }))
                .collect::<Vec<_>>(),
        })),
        ..Default::default()
    };
    write_results(&args.out, &results)?;
    manifest.output(&args.out);
    manifest.write(&args.out)?;
    log::info!(
        "TRIR({}) = {:.4} (chance level {:.4}, population {})",
        results.strategy,
        report.trir,
        report.chance_level,
        report.population
    );
    Ok(())
}

fn truncated(
    entries: Vec<intact_core::risk::BackgroundEntry>,
    config: &AppConfig,
) -> Vec<intact_core::risk::BackgroundEntry> {
    let fraction = config.risk.background_truncation;
    if fraction >= 1.0 {
        return entries;
    }
    entries
        .into_iter()
        .map(|e| {
            let keep = ((e.text.chars().count() as f64 * fraction).ceil() as usize).max(1);
            intact_core::risk::BackgroundEntry {
                individual_id: e.individual_id,
                text: e.text.chars().take(keep).collect(),
            }
        })
        .collect()
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut files = Vec::with_capacity(args.results.len());
    for path in &args.results {
        files.push(read_results(path)?);
    }
    let merged = merge_results(&files);
    let table = render_table(&merged);
    match &args.out {
        Some(path) => {
            corpus::atomic_write(path, table.as_bytes())?;
            log::info!("wrote report for {} strategies to {}", merged.len(), path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_serve_mock(args: ServeMockArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let server =
        MockModelServer::start(&args.addr, config.gateway.mock_seed, config.gateway.mock_embed_dim)?;
    eprintln!("mock model server listening on {}", server.base_url());
    eprintln!("  POST {}/v1/chat/completions", server.base_url());
    eprintln!("  POST {}/v1/embeddings", server.base_url());
    eprintln!("  POST {}/v1/mask_score", server.base_url());
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}

fn cmd_init_config(args: InitConfigArgs) -> Result<()> {
    match &args.out {
        Some(path) => {
            corpus::atomic_write(path, DEFAULT_CONFIG_TOML.as_bytes())
                .with_context(|| format!("cannot write {}", path.display()))?;
            log::info!("wrote default config to {}", path.display());
        }
        None => print!("{DEFAULT_CONFIG_TOML}"),
    }
    Ok(())
}
