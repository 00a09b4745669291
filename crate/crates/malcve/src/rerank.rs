//! Lexical re-ranking and score fusion.
//!
//! Retrieval candidates arrive with a semantic similarity score. This module
//! adds an Okapi BM25 score computed over the candidate pool, min-max
//! normalizes both signals, and combines them as
//! `final = 0.7 * norm_similarity + 0.3 * norm_bm25`. A final expansion pass
//! pulls in knowledge-base CVEs that share a CWE with the top candidates,
//! ranking each just below its best already-ranked sibling.

use crate::cve_kb::KnowledgeBase;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

/// Generic tokens dropped during tokenization. Lowercase by construction.
pub const STOPLIST: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "java", "of",
    "on", "or", "that", "the", "this", "to", "via", "with",
];

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("BM25 corpus must contain at least one document")]
    EmptyCorpus,
    #[error("document index {index} out of range for corpus of {len}")]
    DocIndex { index: usize, len: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FusionConfig {
    pub weight_semantic: f64,
    pub weight_bm25: f64,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// How many fused entries feed CWE expansion and the prediction prompt.
    pub output_top_n: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            weight_semantic: 0.7,
            weight_bm25: 0.3,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            output_top_n: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSource {
    Retrieval,
    CweExpansion,
}

/// A candidate entering fusion: retrieval output joined with its KB record.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub cve_id: String,
    pub similarity: f64,
    pub description: String,
    pub cwe_ids: Vec<String>,
    pub contributing_queries: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCve {
    pub cve_id: String,
    pub similarity: f64,
    pub bm25: f64,
    pub norm_similarity: f64,
    pub norm_bm25: f64,
    pub final_score: f64,
    pub source: RankSource,
    pub contributing_queries: Vec<usize>,
    pub cwe_ids: Vec<String>,
    pub description: String,
}

/// Lowercases, splits on non-alphanumeric boundaries, drops empty pieces and
/// stoplist entries.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| STOPLIST.binary_search(t).is_err())
        .map(String::from)
        .collect()
}

/// Okapi BM25 over a fixed document pool. Statistics (document frequency,
/// average length) are computed over exactly the documents given, which for
/// the pipeline is the retrieval candidate pool rather than the whole KB.
pub struct Bm25Corpus {
    k1: f64,
    b: f64,
    term_freqs: Vec<HashMap<String, usize>>,
    doc_lens: Vec<usize>,
    doc_freq: HashMap<String, usize>,
    avgdl: f64,
}

impl Bm25Corpus {
    pub fn new(documents: &[&str], k1: f64, b: f64) -> Result<Self, RerankError> {
        if documents.is_empty() {
            return Err(RerankError::EmptyCorpus);
        }
        let mut term_freqs = Vec::with_capacity(documents.len());
        let mut doc_lens = Vec::with_capacity(documents.len());
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for doc in documents {
            let tokens = tokenize(doc);
            doc_lens.push(tokens.len());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for term in tf.keys() {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
            term_freqs.push(tf);
        }
        let total: usize = doc_lens.iter().sum();
        let avgdl = if total == 0 {
            // Every document tokenized to nothing; scores will be zero and
            // the length norm must not divide by zero.
            1.0
        } else {
            total as f64 / doc_lens.len() as f64
        };
        Ok(Self {
            k1,
            b,
            term_freqs,
            doc_lens,
            doc_freq,
            avgdl,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_lens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `IDF(q) = ln(1 + (N - n_q + 0.5) / (n_q + 0.5))`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_lens.len() as f64;
        let nq = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - nq + 0.5) / (nq + 0.5)).ln()
    }

    /// Sums over every query token (repeats contribute repeatedly). A query
    /// with no overlap scores exactly 0.0.
    pub fn score(&self, doc_index: usize, query_tokens: &[String]) -> Result<f64, RerankError> {
        let tf = self
            .term_freqs
            .get(doc_index)
            .ok_or(RerankError::DocIndex {
                index: doc_index,
                len: self.doc_lens.len(),
            })?;
        let dl = self.doc_lens[doc_index] as f64;
        let mut score = 0.0;
        for term in query_tokens {
            let f = tf.get(term).copied().unwrap_or(0) as f64;
            if f == 0.0 {
                continue;
            }
            let idf = self.idf(term);
            let denom = f + self.k1 * (1.0 - self.b + self.b * dl / self.avgdl);
            score += idf * f * (self.k1 + 1.0) / denom;
        }
        Ok(score)
    }
}

/// Min-max normalization to [0, 1]. A degenerate pool (max == min) maps
/// every score to 1.0.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return vec![1.0; scores.len()];
    }
    scores.iter().map(|s| (s - min) / (max - min)).collect()
}

/// Normalizes both signals and combines them with the configured weights.
pub fn fuse_scores(similarities: &[f64], bm25: &[f64], config: &FusionConfig) -> Vec<f64> {
    assert_eq!(similarities.len(), bm25.len());
    let ns = min_max_normalize(similarities);
    let nb = min_max_normalize(bm25);
    ns.iter()
        .zip(nb.iter())
        .map(|(s, b)| config.weight_semantic * s + config.weight_bm25 * b)
        .collect()
}

/// Scores the candidate pool and returns it ordered by descending fused
/// score, ties by ascending CVE id. An empty pool fuses to an empty list.
pub fn fuse(
    candidates: &[Candidate],
    query_tokens: &[String],
    config: &FusionConfig,
) -> Result<Vec<RankedCve>, RerankError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let docs: Vec<&str> = candidates.iter().map(|c| c.description.as_str()).collect();
    let corpus = Bm25Corpus::new(&docs, config.bm25_k1, config.bm25_b)?;
    let sims: Vec<f64> = candidates.iter().map(|c| c.similarity).collect();
    let bm25: Vec<f64> = (0..candidates.len())
        .map(|i| corpus.score(i, query_tokens))
        .collect::<Result<_, _>>()?;
    let norm_sims = min_max_normalize(&sims);
    let norm_bm25 = min_max_normalize(&bm25);

    let mut ranked: Vec<RankedCve> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| RankedCve {
            cve_id: c.cve_id.clone(),
            similarity: c.similarity,
            bm25: bm25[i],
            norm_similarity: norm_sims[i],
            norm_bm25: norm_bm25[i],
            final_score: config.weight_semantic * norm_sims[i] + config.weight_bm25 * norm_bm25[i],
            source: RankSource::Retrieval,
            contributing_queries: c.contributing_queries.clone(),
            cwe_ids: c.cwe_ids.clone(),
            description: c.description.clone(),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.final_score
            .total_cmp(&a.final_score)
            .then_with(|| a.cve_id.cmp(&b.cve_id))
    });
    Ok(ranked)
}

/// Offset that places an expansion entry immediately below its sibling.
pub const CWE_EXPANSION_EPSILON: f64 = 1e-6;

/// Appends knowledge-base CVEs that share a CWE with the top
/// `config.output_top_n` ranked entries. The input order is preserved as an
/// exact prefix; expansion entries follow, each scored epsilon below the
/// best ranked entry sharing its CWE, ordered by (score desc, CVE id asc).
/// Expansion entries carry zeroed similarity and BM25 fields.
pub fn expand_by_cwe(
    ranked: &[RankedCve],
    kb: &KnowledgeBase,
    config: &FusionConfig,
) -> Vec<RankedCve> {
    let mut best_by_cwe: HashMap<&str, f64> = HashMap::new();
    for entry in ranked {
        for cwe in &entry.cwe_ids {
            let slot = best_by_cwe.entry(cwe.as_str()).or_insert(f64::NEG_INFINITY);
            if entry.final_score > *slot {
                *slot = entry.final_score;
            }
        }
    }

    let known: HashSet<&str> = ranked.iter().map(|r| r.cve_id.as_str()).collect();
    let mut seen: HashSet<String> = HashSet::new();
    let mut tail: Vec<RankedCve> = Vec::new();

    for entry in ranked.iter().take(config.output_top_n) {
        for cwe in &entry.cwe_ids {
            for record in kb.get_by_cwe(cwe) {
                if known.contains(record.cve_id.as_str()) || seen.contains(&record.cve_id) {
                    continue;
                }
                let base = record
                    .cwe_ids
                    .iter()
                    .filter_map(|c| best_by_cwe.get(c.as_str()))
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                if base == f64::NEG_INFINITY {
                    continue;
                }
                seen.insert(record.cve_id.clone());
                tail.push(RankedCve {
                    cve_id: record.cve_id.clone(),
                    similarity: 0.0,
                    bm25: 0.0,
                    norm_similarity: 0.0,
                    norm_bm25: 0.0,
                    final_score: base - CWE_EXPANSION_EPSILON,
                    source: RankSource::CweExpansion,
                    contributing_queries: Vec::new(),
                    cwe_ids: record.cwe_ids.clone(),
                    description: record.description.clone(),
                });
            }
        }
    }
    tail.sort_by(|a, b| {
        b.final_score
            .total_cmp(&a.final_score)
            .then_with(|| a.cve_id.cmp(&b.cve_id))
    });

    let mut out = ranked.to_vec();
    out.extend(tail);
    out
}
