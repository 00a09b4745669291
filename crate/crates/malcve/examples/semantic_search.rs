//! Embeds natural-language queries and ranks CVE descriptions by cosine
//! similarity, first with the exact index, then aggregated across several
//! queries the way the analysis pipeline does: each CVE keeps its best
//! similarity from any query.
//!
//! ```text
//! cargo run --example semantic_search
//! ```

use std::path::Path;
use std::sync::Arc;

use malcve::clock::SystemClock;
use malcve::cve_kb::feed::parse_feed;
use malcve::cve_kb::KnowledgeBase;
use malcve::embeddings::{EmbeddingProvider, LocalHashEmbedder};
use malcve::vector_index::{aggregate_max, ExactIndex, VectorSearch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feed_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/nvd_feed.json");
    let document: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(feed_path)?)?;
    let entries = parse_feed(&document)?;

    let dir = tempfile::TempDir::new()?;
    let clock = Arc::new(SystemClock::new());
    let embedder = LocalHashEmbedder::new(256);
    let mut kb = KnowledgeBase::create(
        dir.path().join("kb"),
        embedder.model_id(),
        embedder.dim(),
        clock.as_ref(),
    )?;
    kb.ingest(&entries, &embedder)?;
    let index = ExactIndex::from_kb(&kb);

    let queries = [
        "MBeanInstantiator findClass bypasses the security manager",
        "ClassFinder findClass applet escapes the sandbox",
        "color management buffer overflow parsing an image",
    ];

    let mut per_query = Vec::new();
    for query in &queries {
        println!("query: {query}");
        let vector = embedder.embed_text(query)?;
        let hits = index.search(&vector, 3)?;
        for hit in &hits {
            println!("  {:>7.4}  {}", hit.similarity, hit.cve_id);
        }
        per_query.push(hits);
        println!();
    }

    println!("aggregated (best similarity per CVE across all queries):");
    for entry in aggregate_max(&per_query) {
        let sources: Vec<String> = entry
            .contributing_queries
            .iter()
            .map(|q| format!("q{q}"))
            .collect();
        println!(
            "  {:>7.4}  {}  via {}",
            entry.max_similarity,
            entry.cve_id,
            sources.join(",")
        );
    }
    Ok(())
}
