//! Semantic search over the CVE embedding matrix.
//!
//! Two engines implement the same trait: [`ExactIndex`] scans every row and
//! is the correctness reference; [`hnsw::HnswIndex`] is an approximate
//! graph index for larger knowledge bases. Both order results by descending
//! cosine similarity with ties broken by ascending CVE id.

pub mod hnsw;

use crate::cve_kb::KnowledgeBase;
use crate::embeddings::cosine;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::PathBuf;
use thiserror::Error;

pub const INDEX_META_FILE: &str = "index.meta.json";
pub const INDEX_BLOB_FILE: &str = "index.hnsw";

/// Per-search retrieval depth used by the pipeline.
pub const RETRIEVAL_DEPTH: usize = 100;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
    #[error("index does not match the knowledge base: {0}")]
    Mismatch(String),
    #[error("query has dimension {got}, index expects {expected}")]
    QueryDim { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub row: usize,
    pub cve_id: String,
    pub similarity: f64,
}

/// One CVE after max-aggregation across queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedHit {
    pub cve_id: String,
    pub max_similarity: f64,
    /// Indices of the queries whose result lists contained this CVE.
    pub contributing_queries: Vec<usize>,
}

fn hit_order(a: &SearchHit, b: &SearchHit) -> std::cmp::Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then_with(|| a.cve_id.cmp(&b.cve_id))
}

pub trait VectorSearch: Send + Sync {
    fn dim(&self) -> usize;

    /// Top-`k` rows by cosine similarity, descending, ties by CVE id.
    fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, IndexError>;

    fn search_batch(
        &self,
        queries: &[Vec<f32>],
        k: usize,
    ) -> Result<Vec<Vec<SearchHit>>, IndexError> {
        queries.iter().map(|q| self.search(q, k)).collect()
    }
}

/// Brute-force engine: scores every row. Exact by construction.
pub struct ExactIndex {
    data: Vec<f32>,
    dim: usize,
    ids: Vec<String>,
}

impl ExactIndex {
    pub fn from_parts(data: Vec<f32>, dim: usize, ids: Vec<String>) -> Self {
        assert_eq!(data.len(), dim * ids.len(), "matrix shape mismatch");
        Self { data, dim, ids }
    }

    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let (data, dim) = kb.vector_matrix();
        let ids = kb.records().iter().map(|r| r.cve_id.clone()).collect();
        Self::from_parts(data.to_vec(), dim, ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl VectorSearch for ExactIndex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn search(&self, query: &[f32], k: usize) -> Result<Vec<SearchHit>, IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::QueryDim {
                expected: self.dim,
                got: query.len(),
            });
        }
        let mut hits: Vec<SearchHit> = (0..self.ids.len())
            .map(|row| SearchHit {
                row,
                cve_id: self.ids[row].clone(),
                similarity: cosine(query, &self.data[row * self.dim..(row + 1) * self.dim]),
            })
            .collect();
        let k = k.min(hits.len());
        if k < hits.len() {
            hits.select_nth_unstable_by(k, hit_order);
            hits.truncate(k);
        }
        hits.sort_by(hit_order);
        Ok(hits)
    }
}

/// Collapses per-query result lists into one entry per unique CVE, keeping
/// the maximum similarity seen. Output is ordered by descending max
/// similarity, ties by ascending CVE id; `contributing_queries` lists every
/// query that retrieved the CVE, in ascending order.
pub fn aggregate_max(per_query: &[Vec<SearchHit>]) -> Vec<AggregatedHit> {
    let mut best: HashMap<&str, (f64, Vec<usize>)> = HashMap::new();
    for (qi, hits) in per_query.iter().enumerate() {
        for hit in hits {
            let entry = best
                .entry(hit.cve_id.as_str())
                .or_insert((f64::NEG_INFINITY, Vec::new()));
            if hit.similarity > entry.0 {
                entry.0 = hit.similarity;
            }
            if entry.1.last() != Some(&qi) {
                entry.1.push(qi);
            }
        }
    }
    let mut out: Vec<AggregatedHit> = best
        .into_iter()
        .map(
            |(cve_id, (max_similarity, contributing_queries))| AggregatedHit {
                cve_id: cve_id.to_string(),
                max_similarity,
                contributing_queries,
            },
        )
        .collect();
    out.sort_by(|a, b| {
        b.max_similarity
            .total_cmp(&a.max_similarity)
            .then_with(|| a.cve_id.cmp(&b.cve_id))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, hot: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[hot] = 1.0;
        v
    }

    fn tiny_index() -> ExactIndex {
        // Rows: A points along axis 0, B along axis 1, C halfway between.
        let dim = 4;
        let mut data = Vec::new();
        data.extend(unit(dim, 0));
        data.extend(unit(dim, 1));
        let c = vec![
            std::f32::consts::FRAC_1_SQRT_2,
            std::f32::consts::FRAC_1_SQRT_2,
            0.0,
            0.0,
        ];
        data.extend(c);
        ExactIndex::from_parts(
            data,
            dim,
            vec!["CVE-A".into(), "CVE-B".into(), "CVE-C".into()],
        )
    }

    #[test]
    fn search_orders_by_similarity_then_id() {
        let idx = tiny_index();
        let hits = idx.search(&unit(4, 0), 3).unwrap();
        assert_eq!(
            hits.iter().map(|h| h.cve_id.as_str()).collect::<Vec<_>>(),
            vec!["CVE-A", "CVE-C", "CVE-B"]
        );
        assert!((hits[0].similarity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_ties_break_by_ascending_cve_id() {
        let dim = 2;
        let data = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let idx = ExactIndex::from_parts(
            data,
            dim,
            vec![
                "CVE-2013-0422".into(),
                "CVE-2012-4681".into(),
                "CVE-2011-0001".into(),
            ],
        );
        let hits = idx.search(&[1.0, 0.0], 3).unwrap();
        assert_eq!(
            hits.iter().map(|h| h.cve_id.as_str()).collect::<Vec<_>>(),
            vec!["CVE-2011-0001", "CVE-2012-4681", "CVE-2013-0422"]
        );
    }

    #[test]
    fn k_larger_than_corpus_returns_everything() {
        let idx = tiny_index();
        assert_eq!(idx.search(&unit(4, 2), 50).unwrap().len(), 3);
    }

    #[test]
    fn wrong_query_dimension_is_an_error() {
        let idx = tiny_index();
        assert!(matches!(
            idx.search(&[1.0, 0.0], 3),
            Err(IndexError::QueryDim {
                expected: 4,
                got: 2
            })
        ));
    }

    #[test]
    fn aggregate_max_keeps_best_score_and_contributors() {
        let per_query = vec![
            vec![
                SearchHit {
                    row: 0,
                    cve_id: "CVE-A".into(),
                    similarity: 0.9,
                },
                SearchHit {
                    row: 1,
                    cve_id: "CVE-B".into(),
                    similarity: 0.5,
                },
            ],
            vec![
                SearchHit {
                    row: 1,
                    cve_id: "CVE-B".into(),
                    similarity: 0.8,
                },
                SearchHit {
                    row: 0,
                    cve_id: "CVE-A".into(),
                    similarity: 0.4,
                },
            ],
        ];
        let agg = aggregate_max(&per_query);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].cve_id, "CVE-A");
        assert_eq!(agg[0].max_similarity, 0.9);
        assert_eq!(agg[0].contributing_queries, vec![0, 1]);
        assert_eq!(agg[1].cve_id, "CVE-B");
        assert_eq!(agg[1].max_similarity, 0.8);
    }

    #[test]
    fn aggregate_max_tie_orders_by_cve_id() {
        let per_query = vec![vec![
            SearchHit {
                row: 0,
                cve_id: "CVE-B".into(),
                similarity: 0.7,
            },
            SearchHit {
                row: 1,
                cve_id: "CVE-A".into(),
                similarity: 0.7,
            },
        ]];
        let agg = aggregate_max(&per_query);
        assert_eq!(agg[0].cve_id, "CVE-A");
        assert_eq!(agg[1].cve_id, "CVE-B");
    }

    #[test]
    fn aggregate_of_empty_input_is_empty() {
        assert!(aggregate_max(&[]).is_empty());
        assert!(aggregate_max(&[Vec::new()]).is_empty());
    }
}
