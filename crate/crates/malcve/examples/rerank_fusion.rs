//! Re-ranks semantically retrieved CVE candidates by fusing cosine
//! similarity with BM25 lexical scores, then widens the list with CVEs that
//! share a CWE with the leaders. Shows every intermediate column so the
//! arithmetic is visible: raw scores, min-max normalized scores, and the
//! 0.7/0.3 weighted blend.
//!
//! ```text
//! cargo run --example rerank_fusion
//! ```

use std::path::Path;
use std::sync::Arc;

use malcve::clock::SystemClock;
use malcve::cve_kb::feed::parse_feed;
use malcve::cve_kb::KnowledgeBase;
use malcve::embeddings::{EmbeddingProvider, LocalHashEmbedder};
use malcve::rerank::{expand_by_cwe, fuse, Candidate, FusionConfig, RankSource};
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
        "Reflection API recursion skips the security check",
    ];
    let mut per_query = Vec::new();
    for query in &queries {
        per_query.push(index.search(&embedder.embed_text(query)?, 5)?);
    }

    // Aggregation keeps each CVE's best similarity; the knowledge base
    // supplies the description and CWE list that BM25 and expansion need.
    let candidates: Vec<Candidate> = aggregate_max(&per_query)
        .into_iter()
        .map(|entry| {
            let record = kb.get(&entry.cve_id).expect("hit came from this kb");
            Candidate {
                cve_id: entry.cve_id,
                similarity: entry.max_similarity,
                description: record.description.clone(),
                cwe_ids: record.cwe_ids.clone(),
                contributing_queries: entry.contributing_queries,
            }
        })
        .collect();

    let query_tokens: Vec<String> = queries
        .join(" ")
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();

    let config = FusionConfig::default();
    let ranked = fuse(&candidates, &query_tokens, &config)?;
    println!(
        "{:<16} {:>7} {:>7} {:>8} {:>8} {:>7}",
        "cve", "cosine", "bm25", "norm-cos", "norm-b25", "final"
    );
    for entry in &ranked {
        println!(
            "{:<16} {:>7.4} {:>7.3} {:>8.4} {:>8.4} {:>7.4}",
            entry.cve_id,
            entry.similarity,
            entry.bm25,
            entry.norm_similarity,
            entry.norm_bm25,
            entry.final_score
        );
    }

    let expanded = expand_by_cwe(&ranked, &kb, &config);
    println!("\nafter CWE expansion:");
    for entry in &expanded {
        let tag = match entry.source {
            RankSource::Retrieval => "retrieved",
            RankSource::CweExpansion => "expanded ",
        };
        println!(
            "  {tag} {:<16} {:>9.6}  [{}]",
            entry.cve_id,
            entry.final_score,
            entry.cwe_ids.join(", ")
        );
    }
    Ok(())
}
