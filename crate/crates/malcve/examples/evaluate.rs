//! Analyzes the whole bundled corpus in a worker pool, then scores the
//! reports against the ground-truth manifest: malware-detection accuracy,
//! CVE-attribution accuracy, and recall of the true CVE within the top k
//! candidates, grouped per summarization model.
//!
//! ```text
//! cargo run --example evaluate
//! ```

use std::path::Path;
use std::sync::Arc;

use malcve::clock::{Clock, FixedClock};
use malcve::cve_kb::feed::parse_feed;
use malcve::cve_kb::KnowledgeBase;
use malcve::decompile::{DecompilerRole, DecompilerSpec};
use malcve::embeddings::{EmbeddingProvider, LocalHashEmbedder};
use malcve::evalharness::{evaluate_reports, load_reports, render_table, GroundTruthSet};
use malcve::llm::{CostLedger, LlmClientConfig, MockBackend, PriceTable, PromptSet};
use malcve::pipeline::batch::{run_batch, WorkSource};
use malcve::pipeline::PipelineContext;
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

    let prices = PriceTable::default();
    let ctx = PipelineContext {
        index: Arc::new(ExactIndex::from_kb(&kb)),
        kb,
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

    let sources: Vec<WorkSource> = std::fs::read_dir(fixtures.join("jars"))?
        .filter_map(Result::ok)
        .map(|e| WorkSource::Path(e.path()))
        .collect();
    let summary = run_batch(&sources, 2, &ctx)?;
    println!(
        "analyzed: done {} failed {} excluded {} (cost ${})",
        summary.done, summary.failed, summary.excluded, summary.total_cost_display
    );

    let truth = GroundTruthSet::from_csv_file(&fixtures.join("truth.csv"))?;
    let reports = load_reports(&ctx.out_dir)?;
    let output = evaluate_reports(&reports, &truth, &[1, 3, 5, 10])?;

    println!(
        "\nfiles {}  detection accuracy {}  attribution accuracy {}",
        output.overall.n_files, output.overall.accuracy_rq1, output.overall.accuracy_rq2
    );
    for (k, metric) in &output.overall.recall_at {
        println!("recall@{k} {metric}");
    }
    println!();
    print!("{}", render_table(&output.per_model));
    Ok(())
}
