//! Runs the complete analysis pipeline on a bundled sample entirely
//! offline: a stub decompiler plants fixture sources, a scripted backend
//! answers the three prompts, and the local hash embedder powers retrieval.
//! Prints the verdict, the generated queries, the fused candidate ranking,
//! the predicted CVE, and what the run would have cost.
//!
//! ```text
//! cargo run --example analyze_jar
//! ```

use std::path::Path;
use std::sync::Arc;

use malcve::clock::{Clock, FixedClock};
use malcve::cve_kb::feed::parse_feed;
use malcve::cve_kb::KnowledgeBase;
use malcve::decompile::{DecompilerRole, DecompilerSpec};
use malcve::embeddings::{EmbeddingProvider, LocalHashEmbedder};
use malcve::llm::{CostLedger, LlmClientConfig, MockBackend, PriceTable, PromptSet};
use malcve::pipeline::{run_analysis, PipelineContext};
use malcve::rerank::FusionConfig;
use malcve::vector_index::ExactIndex;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::TempDir::new()?;

    let document: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures.join("nvd_feed.json"))?)?;
    let entries = parse_feed(&document)?;
    let clock: Arc<dyn Clock> = Arc::new(FixedClock::at_epoch());
    let embedder = Arc::new(LocalHashEmbedder::new(512));
    let mut kb = KnowledgeBase::create(
        dir.path().join("kb"),
        embedder.model_id(),
        embedder.dim(),
        clock.as_ref(),
    )?;
    kb.ingest(&entries, embedder.as_ref())?;
    let kb = Arc::new(kb);
    let index = Arc::new(ExactIndex::from_kb(&kb));

    let prices = PriceTable::default();
    let ctx = PipelineContext {
        kb,
        index,
        embedder,
        backend: Arc::new(MockBackend::from_script_file(
            &fixtures.join("mock_llm.json"),
        )?),
        prompts: PromptSet::builtin(),
        llm_config: LlmClientConfig::default(),
        decompilers: vec![DecompilerSpec::new(
            "fixture-decompiler",
            vec![
                fixtures.join("decompiler.sh").display().to_string(),
                "{jar}".to_string(),
                "{outdir}".to_string(),
            ],
            DecompilerRole::Primary,
        )],
        fusion: FusionConfig::default(),
        prices: prices.clone(),
        ledger: Arc::new(CostLedger::new(prices)),
        rate: None,
        in_flight: None,
        fetcher: None,
        download_limiter: None,
        clock,
        out_dir: dir.path().join("out"),
        retrieval_depth: 100,
        extra_stop_tokens: Vec::new(),
        config_snapshot: serde_json::json!({"profile": "example"}),
    };

    let jar = fixtures.join("jars/jmxloadery.jar");
    println!("analyzing {}", jar.display());
    let report = run_analysis(&jar, &ctx)?;

    println!("\nstate: {:?}", report.state);
    println!(
        "decompiled with: {}",
        report.decompile.tool_used.as_deref().unwrap_or("none")
    );
    if let Some(fold) = &report.deobfuscation {
        println!(
            "deobfuscation: {} of {} files changed, {} folds",
            fold.files_changed, fold.files_processed, fold.total_folds
        );
    }
    if let Some(summary) = &report.code_summary {
        println!("verdict: {:?}", summary.verdict.label);
        println!("summary: {}", summary.summary);
    }
    println!("\nsearch queries:");
    for query in &report.search_queries {
        println!("  {query}");
    }
    println!("\ntop candidates:");
    for entry in report.candidates.iter().take(5) {
        println!(
            "  {:>9.6}  {}  ({:?})",
            entry.final_score, entry.cve_id, entry.source
        );
    }
    if let Some(prediction) = &report.prediction {
        println!("\npredicted: {}", prediction.matched_cve);
        println!("because: {}", prediction.justification);
    }
    println!("\nmodel usage:");
    let usage = &report.metadata.usage;
    for (model, tokens) in &usage.per_model {
        println!(
            "  {model}: {} in / {} out / {} embedded",
            tokens.input_tokens, tokens.output_tokens, tokens.embedding_tokens
        );
    }
    println!("cost: ${}", usage.cost_display);
    println!(
        "\nreport written to {}",
        ctx.out_dir
            .join(format!("{}.report.json", report.file_sha256))
            .display()
    );
    Ok(())
}
