//! Command surface: ingest a CVE feed, analyze JARs, evaluate report runs,
//! and fold obfuscated strings in Java sources.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error. `--json` switches human-readable output to machine-readable
//! JSON. Setting `SOURCE_DATE_EPOCH` pins all timestamps, making report
//! output reproducible byte for byte.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::clock::{Clock, FixedClock, SystemClock};
use crate::config::{AppConfig, ConfigError, IndexKind, LlmBackendKind};
use crate::cve_kb::nvd_client::{HttpNvdSource, DEFAULT_NVD_BASE_URL, NVD_API_KEY_ENV};
use crate::cve_kb::{feed, load_feed_value, KnowledgeBase, MANIFEST_FILE};
use crate::deobfuscator::deobfuscate_dir;
use crate::embeddings::{build_provider, EmbeddingProviderKind};
use crate::evalharness::{self, EvalError, GroundTruthSet};
use crate::llm::rate::RequestRateLimiter;
use crate::llm::{
    CostLedger, InFlightLimiter, LlmBackend, MockBackend, PromptSet, RemoteBackend,
    TokenRateLimiter,
};
use crate::pipeline::batch::{parse_manifest, run_batch, WorkSource};
use crate::pipeline::{Fetcher, HttpFetcher, PipelineContext};
use crate::transport::{HttpTransport, Transport};
use crate::vector_index::hnsw::{HnswIndex, HnswParams};
use crate::vector_index::{ExactIndex, VectorSearch};

/// Unix-seconds timestamp that, when set, replaces the system clock with a
/// fixed one for reproducible output.
pub const SOURCE_DATE_EPOCH_ENV: &str = "SOURCE_DATE_EPOCH";

pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while executing a valid request; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn usage(err: impl std::fmt::Display) -> CliError {
    CliError::Usage(err.to_string())
}

fn runtime(err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "malcve",
    version,
    about = "Classify Java binaries with an LLM and attribute them to likely CVEs"
)]
pub struct Cli {
    /// Configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Emit machine-readable JSON instead of human-readable text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or update the CVE knowledge base from an NVD-format feed.
    Ingest(IngestArgs),
    /// Analyze a JAR or a manifest of JARs and write per-file reports.
    Analyze(AnalyzeArgs),
    /// Score a directory of reports against a ground-truth manifest.
    Eval(EvalArgs),
    /// Fold obfuscated string constructions in Java source files.
    Deobfuscate(DeobfuscateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderChoice {
    /// OpenAI-compatible embedding endpoint (MALCVE_EMBED_URL).
    Remote,
    /// Deterministic hashed bag-of-tokens embedder; no network.
    Local,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Feed document: local JSON path or http(s) URL.
    #[arg(long, value_name = "PATH|URL")]
    pub feed: Option<String>,
    /// Knowledge-base directory, created on first use.
    #[arg(long, value_name = "DIR")]
    pub kb: PathBuf,
    /// Embedding provider, overriding the config file.
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderChoice>,
    /// Vector dimension, overriding the config file.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Pull changed records from the NVD API instead of reading --feed.
    #[arg(long)]
    pub refresh: bool,
    /// RFC 3339 lower bound on last-modified time for --refresh.
    #[arg(long, value_name = "TIMESTAMP", requires = "refresh")]
    pub since: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// A .jar file, or a manifest listing jar paths and sha256 hashes.
    pub input: PathBuf,
    /// Knowledge-base directory to retrieve CVE candidates from.
    #[arg(long, value_name = "DIR")]
    pub kb: PathBuf,
    /// Number of concurrent analysis workers.
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    /// Directory for reports and the batch journal.
    #[arg(long, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of *.report.json files.
    #[arg(long, value_name = "DIR")]
    pub reports: PathBuf,
    /// CSV manifest: sha256,is_malicious,cve_list (semicolons between CVEs).
    #[arg(long, value_name = "CSV")]
    pub truth: PathBuf,
    /// Candidate-list depths for recall, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
    pub k: Vec<usize>,
    /// Where to write metrics.json; defaults to the reports directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeobfuscateArgs {
    /// A .java file or a directory tree of sources.
    pub path: PathBuf,
    /// Print unified diffs without modifying any file.
    #[arg(long)]
    pub dry_run: bool,
}

/// Executes a parsed invocation. Errors map to exit codes via
/// [`CliError::code`].
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = AppConfig::load_or_default(cli.config.as_deref()).map_err(|e| match e {
        ConfigError::Invalid(_) | ConfigError::Parse { .. } | ConfigError::Io { .. } => usage(e),
    })?;
    let config_dir = cli
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf);
    match cli.command {
        Command::Ingest(args) => cmd_ingest(&config, &args, cli.json),
        Command::Analyze(args) => cmd_analyze(&config, config_dir.as_deref(), &args, cli.json),
        Command::Eval(args) => cmd_eval(&args, cli.json),
        Command::Deobfuscate(args) => cmd_deobfuscate(&args, cli.json),
    }
}

/// System clock, or a fixed clock when `SOURCE_DATE_EPOCH` is set.
pub fn clock_from_env() -> Arc<dyn Clock> {
    let fixed = env::var(SOURCE_DATE_EPOCH_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    match fixed {
        Some(at) => Arc::new(FixedClock::new(at)),
        None => Arc::new(SystemClock::new()),
    }
}

/// Paths in a config file resolve relative to the file's directory.
fn resolve_path(config_dir: Option<&Path>, path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match config_dir {
        Some(dir) => dir.join(path),
        None => path.to_path_buf(),
    }
}

fn cmd_ingest(config: &AppConfig, args: &IngestArgs, json: bool) -> Result<(), CliError> {
    let clock = clock_from_env();
    let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new());

    let mut embed_config = config.embedding.clone();
    if let Some(dim) = args.dim {
        embed_config.dim = dim;
    }
    if args.embedder == Some(EmbedderChoice::Local) {
        embed_config.provider = EmbeddingProviderKind::LocalDeterministic;
        embed_config.model_id = format!("local-hash-{}", embed_config.dim);
    } else if args.embedder == Some(EmbedderChoice::Remote) {
        embed_config.provider = EmbeddingProviderKind::Remote;
    }
    let provider = build_provider(
        &embed_config,
        config.resolve_embed_url(),
        config.resolve_embed_api_key(),
        transport.clone(),
        clock.clone(),
    )
    .map_err(usage)?;

    let mut kb = if args.kb.join(MANIFEST_FILE).exists() {
        KnowledgeBase::open_for_write(&args.kb).map_err(usage)?
    } else {
        KnowledgeBase::create(
            &args.kb,
            provider.model_id(),
            provider.dim(),
            clock.as_ref(),
        )
        .map_err(usage)?
    };

    let stats = if args.refresh {
        let since = args
            .since
            .as_deref()
            .map(|s| {
                DateTime::parse_from_rfc3339(s)
                    .map(|t| t.with_timezone(&Utc))
                    .map_err(|e| usage(format!("--since {s:?}: {e}")))
            })
            .transpose()?;
        let api_key = env::var(NVD_API_KEY_ENV)
            .ok()
            .filter(|v| !v.trim().is_empty());
        let source = HttpNvdSource::new(
            DEFAULT_NVD_BASE_URL,
            api_key,
            transport.clone(),
            clock.clone(),
        );
        kb.refresh(&source, provider.as_ref(), since, clock.as_ref())
            .map_err(runtime)?
    } else {
        let Some(location) = &args.feed else {
            return Err(usage("--feed is required unless --refresh is set"));
        };
        let document = load_feed_value(location, transport.as_ref()).map_err(usage)?;
        let entries = feed::parse_feed(&document).map_err(runtime)?;
        kb.ingest(&entries, provider.as_ref()).map_err(runtime)?
    };
    kb.persist().map_err(runtime)?;

    if json {
        let out = serde_json::json!({
            "kb": args.kb.display().to_string(),
            "records": kb.len(),
            "stats": stats,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&out).expect("serializes")
        );
    } else {
        println!("{}", stats.summary());
        println!("kb {} now holds {} records", args.kb.display(), kb.len());
    }
    Ok(())
}

fn build_context(
    config: &AppConfig,
    config_dir: Option<&Path>,
    kb_dir: &Path,
    out_dir: &Path,
) -> Result<PipelineContext, CliError> {
    if !kb_dir.join(MANIFEST_FILE).exists() {
        return Err(usage(format!(
            "no knowledge base at {} (run `malcve ingest` first)",
            kb_dir.display()
        )));
    }
    let kb = KnowledgeBase::open(kb_dir).map_err(usage)?;
    let clock = clock_from_env();
    let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new());

    let embedder = build_provider(
        &config.embedding,
        config.resolve_embed_url(),
        config.resolve_embed_api_key(),
        transport.clone(),
        clock.clone(),
    )
    .map_err(usage)?;
    if embedder.model_id() != kb.manifest().embedding_model || embedder.dim() != kb.dim() {
        return Err(usage(format!(
            "embedding mismatch: config gives {} (dim {}) but the knowledge base was built with {} (dim {})",
            embedder.model_id(),
            embedder.dim(),
            kb.manifest().embedding_model,
            kb.dim()
        )));
    }

    let index: Arc<dyn VectorSearch> = match config.index {
        IndexKind::Exact => Arc::new(ExactIndex::from_kb(&kb)),
        IndexKind::Hnsw => Arc::new(HnswIndex::build_from_kb(&kb, HnswParams::default())),
    };

    let backend: Arc<dyn LlmBackend> = match config.llm_backend.kind {
        LlmBackendKind::Mock => {
            let script = config
                .llm_backend
                .script
                .as_deref()
                .expect("validated: mock requires script");
            let script = resolve_path(config_dir, script);
            Arc::new(MockBackend::from_script_file(&script).map_err(usage)?)
        }
        LlmBackendKind::Remote => {
            let url = config.resolve_llm_url().ok_or_else(|| {
                usage("no chat endpoint: set MALCVE_LLM_URL or llm_backend.url in the config")
            })?;
            let api_key = config.resolve_llm_api_key();
            Arc::new(
                RemoteBackend::new(&url, api_key.as_deref(), transport.clone(), clock.clone())
                    .with_max_retries(config.llm_backend.max_retries),
            )
        }
    };

    let prompts = match &config.prompts_dir {
        Some(dir) => PromptSet::load(&resolve_path(config_dir, dir)).map_err(usage)?,
        None => PromptSet::builtin(),
    };

    let fetcher: Option<Arc<dyn Fetcher>> = config.download_url_template.as_deref().map(|tpl| {
        Arc::new(HttpFetcher::new(
            tpl,
            Vec::new(),
            transport.clone(),
            clock.clone(),
        )) as Arc<dyn Fetcher>
    });

    Ok(PipelineContext {
        kb: Arc::new(kb),
        index,
        embedder,
        backend,
        prompts,
        llm_config: config.llm.clone(),
        decompilers: config.decompilers.clone(),
        fusion: config.fusion.clone(),
        prices: config.prices.clone(),
        ledger: Arc::new(CostLedger::new(config.prices.clone())),
        rate: config
            .rate
            .tokens_per_minute
            .map(|t| Arc::new(TokenRateLimiter::new(t, clock.clone()))),
        in_flight: config
            .rate
            .max_in_flight
            .map(|n| Arc::new(InFlightLimiter::new(n))),
        fetcher,
        download_limiter: config.rate.downloads_per_minute.map(|n| {
            Arc::new(RequestRateLimiter::new(
                n,
                Duration::from_secs(60),
                clock.clone(),
            ))
        }),
        clock,
        out_dir: out_dir.to_path_buf(),
        retrieval_depth: config.retrieval_depth,
        extra_stop_tokens: config.extra_stop_tokens.clone(),
        config_snapshot: config.snapshot(),
    })
}

fn analyze_sources(input: &Path) -> Result<Vec<WorkSource>, CliError> {
    if input.extension().is_some_and(|e| e == "jar") {
        return Ok(vec![WorkSource::Path(input.to_path_buf())]);
    }
    let text = fs::read_to_string(input)
        .map_err(|e| usage(format!("reading manifest {}: {e}", input.display())))?;
    let base = input.parent().unwrap_or_else(|| Path::new("."));
    let sources = parse_manifest(&text, base);
    if sources.is_empty() {
        return Err(usage(format!(
            "manifest {} lists no inputs",
            input.display()
        )));
    }
    Ok(sources)
}

fn cmd_analyze(
    config: &AppConfig,
    config_dir: Option<&Path>,
    args: &AnalyzeArgs,
    json: bool,
) -> Result<(), CliError> {
    let sources = analyze_sources(&args.input)?;
    let ctx = build_context(config, config_dir, &args.kb, &args.out)?;
    let summary = run_batch(&sources, args.workers, &ctx).map_err(runtime)?;

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("serializes")
        );
    } else {
        println!(
            "done {}  failed {}  excluded {}  resumed {}",
            summary.done, summary.failed, summary.excluded, summary.resumed
        );
        let analyzed =
            (summary.done + summary.failed + summary.excluded).saturating_sub(summary.resumed);
        if analyzed > 0 {
            let mean = summary.total_cost_pico / analyzed as u128;
            println!(
                "cost ${} total, ${} mean per analyzed file",
                summary.total_cost_display,
                crate::llm::cost::format_pico(mean)
            );
        } else {
            println!("cost ${} total", summary.total_cost_display);
        }
        println!("reports in {}", args.out.display());
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs, json: bool) -> Result<(), CliError> {
    if args.k.is_empty() {
        return Err(usage("--k needs at least one depth"));
    }
    if let Some(zero) = args.k.iter().find(|&&k| k == 0) {
        return Err(usage(format!("--k {zero}: depths must be at least 1")));
    }
    let mut ks = args.k.clone();
    ks.sort_unstable();
    ks.dedup();

    if !args.reports.is_dir() {
        return Err(usage(format!(
            "reports directory {} not found",
            args.reports.display()
        )));
    }
    let truth = GroundTruthSet::from_csv_file(&args.truth).map_err(usage)?;
    let reports = evalharness::load_reports(&args.reports).map_err(runtime)?;
    let output = evalharness::evaluate_reports(&reports, &truth, &ks).map_err(|e| match e {
        EvalError::InvalidK { .. } => usage(e),
        other => runtime(other),
    })?;

    let out_dir = args.out.as_deref().unwrap_or(&args.reports);
    fs::create_dir_all(out_dir)
        .map_err(|e| runtime(format!("creating {}: {e}", out_dir.display())))?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let mut document = serde_json::to_string_pretty(&output).expect("serializes");
    document.push('\n');
    fs::write(&metrics_path, document.as_bytes())
        .map_err(|e| runtime(format!("writing {}: {e}", metrics_path.display())))?;

    if json {
        print!("{document}");
    } else {
        println!(
            "files {}  rq1 {}  rq2 {}",
            output.overall.n_files, output.overall.accuracy_rq1, output.overall.accuracy_rq2
        );
        for (k, metric) in &output.overall.recall_at {
            println!("recall@{k} {metric}");
        }
        println!();
        print!("{}", evalharness::render_table(&output.per_model));
        println!("metrics written to {}", metrics_path.display());
    }
    Ok(())
}

fn cmd_deobfuscate(args: &DeobfuscateArgs, json: bool) -> Result<(), CliError> {
    if !args.path.exists() {
        return Err(usage(format!("{} does not exist", args.path.display())));
    }
    let apply = !args.dry_run;
    let outcomes = deobfuscate_dir(&args.path, apply, args.dry_run).map_err(runtime)?;

    if json {
        let rows: Vec<serde_json::Value> = outcomes
            .iter()
            .map(|o| {
                serde_json::json!({
                    "path": o.path.display().to_string(),
                    "folds": o.folds,
                    "changed": o.changed,
                    "diagnostics": o.diagnostics,
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).expect("serializes")
        );
        return Ok(());
    }

    if args.dry_run {
        for outcome in &outcomes {
            if let Some(diff) = &outcome.diff {
                print!("{diff}");
            }
        }
    }
    let changed = outcomes.iter().filter(|o| o.changed).count();
    let folds: usize = outcomes.iter().map(|o| o.folds).sum();
    println!(
        "{changed}/{} files changed, {folds} folds{}",
        outcomes.len(),
        if args.dry_run { " (dry run)" } else { "" }
    );
    Ok(())
}
