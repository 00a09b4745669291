//! Malware classification and CVE attribution for decompiled Java binaries.
//!
//! The pipeline takes a JAR, decompiles it (with a fallback tool, excluding
//! the file if both fail), folds obfuscated string constants back into
//! literals, and asks a language model for a structured summary and a
//! Benign/Suspicious/Malicious verdict. Benign files stop there. For the
//! rest, model-generated search queries retrieve candidate CVEs from an
//! embedded knowledge base by cosine similarity; candidates are re-ranked
//! by fusing the semantic score with BM25 (`0.7 / 0.3` after min-max
//! normalization), widened with CVEs sharing a CWE with the leaders, and
//! the top ten go back to the model for a final attribution. Every run
//! writes a self-contained `<sha256>.report.json` carrying the verdict,
//! ranked candidates, prediction, prompt hashes, effective config, token
//! usage, and exact integer cost, so a report is reproducible evidence,
//! not just an answer.
//!
//! Determinism is injected everywhere it matters: clocks are a trait
//! ([`clock`]), the scripted LLM backend replays canned responses, the
//! local hash embedder needs no network, and identical runs produce
//! byte-identical reports.
//!
//! Module map:
//!
//! - [`pipeline`]: per-file analysis, batch orchestration with a resumable
//!   journal, report shapes.
//! - [`cve_kb`]: NVD-format feed parsing, incremental API refresh, and the
//!   persisted knowledge base (descriptions, CWE groupings, vectors).
//! - [`embeddings`]: remote OpenAI-compatible provider and a deterministic
//!   local one.
//! - [`vector_index`]: exact cosine search and a seeded HNSW graph.
//! - [`rerank`]: BM25, score fusion, CWE expansion.
//! - [`llm`]: prompt templates, schema-validated client with repair
//!   reprompts, mock and remote backends, token rate limiting, cost ledger.
//! - [`deobfuscator`]: constant folding for obfuscated Java strings.
//! - [`decompile`]: external decompiler invocation with fallback.
//! - [`evalharness`]: ground-truth scoring (accuracy, recall@k) and
//!   cross-run statistics.
//! - [`cli`] / [`config`]: the `malcve` binary's commands and its JSON
//!   configuration.
//!
//! Each capability has a runnable demonstration under `examples/`:
//! `build_kb`, `semantic_search`, `rerank_fusion`, `deobfuscate`,
//! `analyze_jar`, `evaluate`, and `rate_and_cost`, all offline and backed
//! by the bundled fixtures.

pub mod cli;
pub mod clock;
pub mod config;
pub mod cve_kb;
pub mod decompile;
pub mod deobfuscator;
pub mod embeddings;
pub mod evalharness;
pub mod llm;
pub mod pipeline;
pub mod rerank;
pub mod transport;
pub mod vector_index;
