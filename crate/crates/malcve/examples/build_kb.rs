//! Builds a CVE knowledge base from the bundled NVD-format feed, then reads
//! it back to show what a knowledge base holds: embedded description
//! vectors, CWE groupings, and a manifest pinning the embedding model.
//!
//! ```text
//! cargo run --example build_kb
//! ```

use std::path::Path;
use std::sync::Arc;

use malcve::clock::SystemClock;
use malcve::cve_kb::feed::parse_feed;
use malcve::cve_kb::KnowledgeBase;
use malcve::embeddings::{EmbeddingProvider, LocalHashEmbedder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feed_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/nvd_feed.json");
    let document: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&feed_path)?)?;
    let entries = parse_feed(&document)?;
    println!(
        "feed {} holds {} entries",
        feed_path.display(),
        entries.len()
    );

    let dir = tempfile::TempDir::new()?;
    let clock = Arc::new(SystemClock::new());
    let embedder = LocalHashEmbedder::new(256);
    let mut kb = KnowledgeBase::create(
        dir.path().join("kb"),
        embedder.model_id(),
        embedder.dim(),
        clock.as_ref(),
    )?;
    let stats = kb.ingest(&entries, &embedder)?;
    kb.persist()?;
    println!("ingest: {}", stats.summary());
    drop(kb);

    // Re-ingesting the same feed is idempotent; descriptions that did not
    // change keep their stored vectors.
    let mut kb = KnowledgeBase::open_for_write(dir.path().join("kb"))?;
    let stats = kb.ingest(&entries, &embedder)?;
    println!("repeat: {}", stats.summary());

    let kb = KnowledgeBase::open(dir.path().join("kb"))?;
    println!(
        "\nkb: {} records, model {}, dim {}",
        kb.len(),
        kb.manifest().embedding_model,
        kb.dim()
    );

    if let Some(record) = kb.get("CVE-2013-0422") {
        println!("\nCVE-2013-0422:");
        println!("  cwes: {}", record.cwe_ids.join(", "));
        println!("  description: {}", record.description);
    }

    println!("\nrecords filed under CWE-264:");
    for record in kb.get_by_cwe("CWE-264") {
        println!("  {}", record.cve_id);
    }
    Ok(())
}
