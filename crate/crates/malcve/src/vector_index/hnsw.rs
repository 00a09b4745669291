//! Approximate nearest-neighbor search over a layered proximity graph.
//!
//! Construction is deterministic: level assignment draws from a seeded
//! ChaCha stream, neighbor selection breaks ties on node id, and searches
//! sort final results by (similarity desc, CVE id asc). Building the same
//! data with the same seed yields an identical graph.

use super::{hit_order, IndexError, SearchHit, VectorSearch, INDEX_BLOB_FILE, INDEX_META_FILE};
use crate::cve_kb::{sha256_hex, KnowledgeBase};
use crate::embeddings::cosine;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

const BLOB_MAGIC: &[u8; 8] = b"MCVEHNSW";
const BLOB_VERSION: u32 = 1;
const MAX_LEVEL_CAP: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnswParams {
    /// Neighbors kept per node per layer (layer 0 keeps twice as many).
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 128,
            seed: 0x4D41_4C43,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HnswMeta {
    pub algorithm: String,
    pub dim: usize,
    pub count: usize,
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
    pub entry_point: u32,
    pub max_level: usize,
    /// SHA-256 of the little-endian f32 matrix the graph was built over.
    pub vectors_sha256: String,
}

#[derive(Clone, PartialEq)]
struct Scored {
    sim: f64,
    node: u32,
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap by similarity; on ties the smaller node id wins.
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.node.cmp(&self.node))
    }
}

pub struct HnswIndex {
    params: HnswParams,
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
    /// node -> layer -> neighbor ids
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
    max_level: usize,
}

impl HnswIndex {
    pub fn build(data: Vec<f32>, dim: usize, ids: Vec<String>, params: HnswParams) -> Self {
        assert_eq!(data.len(), dim * ids.len(), "matrix shape mismatch");
        let n = ids.len();
        let mut index = Self {
            params,
            dim,
            data,
            ids,
            links: Vec::with_capacity(n),
            entry: 0,
            max_level: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(index.params.seed);
        for node in 0..n as u32 {
            index.insert(node, &mut rng);
        }
        index
    }

    pub fn build_from_kb(kb: &KnowledgeBase, params: HnswParams) -> Self {
        let (data, dim) = kb.vector_matrix();
        let ids = kb.records().iter().map(|r| r.cve_id.clone()).collect();
        Self::build(data.to_vec(), dim, ids, params)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    fn row(&self, node: u32) -> &[f32] {
        &self.data[node as usize * self.dim..(node as usize + 1) * self.dim]
    }

    fn random_level(&self, rng: &mut ChaCha8Rng) -> usize {
        let ml = 1.0 / (self.params.m as f64).ln();
        let u: f64 = 1.0 - rng.gen::<f64>();
        ((-u.ln() * ml).floor() as usize).min(MAX_LEVEL_CAP)
    }

    fn search_layer(&self, query: &[f32], entry: u32, ef: usize, level: usize) -> Vec<Scored> {
        let mut visited = vec![false; self.ids.len()];
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();

        visited[entry as usize] = true;
        let seed = Scored {
            sim: cosine(query, self.row(entry)),
            node: entry,
        };
        candidates.push(seed.clone());
        results.push(Reverse(seed));

        while let Some(current) = candidates.pop() {
            let worst = results.peek().map(|r| r.0.sim).unwrap_or(f64::NEG_INFINITY);
            if results.len() >= ef && current.sim < worst {
                break;
            }
            for &nb in &self.links[current.node as usize][level] {
                if visited[nb as usize] {
                    continue;
                }
                visited[nb as usize] = true;
                let sim = cosine(query, self.row(nb));
                let worst = results.peek().map(|r| r.0.sim).unwrap_or(f64::NEG_INFINITY);
                if results.len() < ef || sim > worst {
                    let s = Scored { sim, node: nb };
                    candidates.push(s.clone());
                    results.push(Reverse(s));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = results.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    fn insert(&mut self, node: u32, rng: &mut ChaCha8Rng) {
        let level = self.random_level(rng);
        self.links.push(vec![Vec::new(); level + 1]);
        if node == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }

        let query = self.row(node).to_vec();
        let top = self.max_level;
        let mut ep = self.entry;
        for l in ((level + 1)..=top).rev() {
            if let Some(best) = self.search_layer(&query, ep, 1, l).first() {
                ep = best.node;
            }
        }
        for l in (0..=level.min(top)).rev() {
            let found = self.search_layer(&query, ep, self.params.ef_construction, l);
            let keep = if l == 0 {
                self.params.m * 2
            } else {
                self.params.m
            };
            let selected: Vec<u32> = found.iter().take(self.params.m).map(|s| s.node).collect();
            self.links[node as usize][l] = selected.clone();
            for &nb in &selected {
                self.links[nb as usize][l].push(node);
                if self.links[nb as usize][l].len() > keep {
                    self.shrink(nb, l, keep);
                }
            }
            if let Some(best) = found.first() {
                ep = best.node;
            }
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = node;
        }
    }

    fn shrink(&mut self, node: u32, level: usize, keep: usize) {
        let base = self.row(node).to_vec();
        let mut scored: Vec<Scored> = self.links[node as usize][level]
            .iter()
            .map(|&nb| Scored {
                sim: cosine(&base, self.row(nb)),
                node: nb,
            })
            .collect();
        scored.sort_by(|a, b| b.cmp(a));
        scored.truncate(keep);
        self.links[node as usize][level] = scored.into_iter().map(|s| s.node).collect();
    }

    pub fn meta(&self) -> HnswMeta {
        HnswMeta {
            algorithm: "hnsw".to_string(),
            dim: self.dim,
            count: self.ids.len(),
            m: self.params.m,
            ef_construction: self.params.ef_construction,
            ef_search: self.params.ef_search,
            seed: self.params.seed,
            entry_point: self.entry,
            max_level: self.max_level,
            vectors_sha256: matrix_sha256(&self.data),
        }
    }

    /// Writes `index.meta.json` and the link blob into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        let io = |path: &Path| {
            let p = path.to_path_buf();
            move |source| IndexError::Io { path: p, source }
        };
        let meta_path = dir.join(INDEX_META_FILE);
        let mut meta = serde_json::to_string_pretty(&self.meta()).expect("meta serializes");
        meta.push('\n');
        fs::write(&meta_path, meta).map_err(io(&meta_path))?;

        let mut blob = Vec::new();
        blob.extend_from_slice(BLOB_MAGIC);
        blob.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        blob.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        for node in &self.links {
            blob.extend_from_slice(&(node.len() as u32).to_le_bytes());
            for layer in node {
                blob.extend_from_slice(&(layer.len() as u32).to_le_bytes());
                for &nb in layer {
                    blob.extend_from_slice(&nb.to_le_bytes());
                }
            }
        }
        let blob_path = dir.join(INDEX_BLOB_FILE);
        fs::write(&blob_path, blob).map_err(io(&blob_path))?;
        Ok(())
    }

    /// Loads a saved graph and re-binds it to the given matrix and ids,
    /// verifying that they are the ones the graph was built over.
    pub fn load(
        dir: &Path,
        data: Vec<f32>,
        dim: usize,
        ids: Vec<String>,
    ) -> Result<Self, IndexError> {
        let meta_path = dir.join(INDEX_META_FILE);
        let raw = fs::read_to_string(&meta_path).map_err(|source| IndexError::Io {
            path: meta_path.clone(),
            source,
        })?;
        let meta: HnswMeta =
            serde_json::from_str(&raw).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        if meta.algorithm != "hnsw" {
            return Err(IndexError::Corrupt(format!(
                "unknown algorithm {}",
                meta.algorithm
            )));
        }
        if meta.dim != dim || meta.count != ids.len() {
            return Err(IndexError::Mismatch(format!(
                "index is {}x{}, knowledge base is {}x{}",
                meta.count,
                meta.dim,
                ids.len(),
                dim
            )));
        }
        let hash = matrix_sha256(&data);
        if meta.vectors_sha256 != hash {
            return Err(IndexError::Mismatch(
                "vector matrix changed since the index was built".to_string(),
            ));
        }

        let blob_path = dir.join(INDEX_BLOB_FILE);
        let blob = fs::read(&blob_path).map_err(|source| IndexError::Io {
            path: blob_path.clone(),
            source,
        })?;
        let links = decode_links(&blob, ids.len())?;

        Ok(Self {
            params: HnswParams {
                m: meta.m,
                ef_construction: meta.ef_construction,
                ef_search: meta.ef_search,
                seed: meta.seed,
            },
            dim,
            data,
            ids,
            links,
            entry: meta.entry_point,
            max_level: meta.max_level,
        })
    }

    pub fn load_for_kb(dir: &Path, kb: &KnowledgeBase) -> Result<Self, IndexError> {
        let (data, dim) = kb.vector_matrix();
        let ids = kb.records().iter().map(|r| r.cve_id.clone()).collect();
        Self::load(dir, data.to_vec(), dim, ids)
    }
}

pub fn matrix_sha256(data: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for &x in data {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    sha256_hex(&bytes)
}

fn decode_links(blob: &[u8], expected_nodes: usize) -> Result<Vec<Vec<Vec<u32>>>, IndexError> {
    let corrupt = |msg: &str| IndexError::Corrupt(format!("link blob: {msg}"));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], IndexError> {
        if pos + n > blob.len() {
            return Err(corrupt("truncated"));
        }
        let s = &blob[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let read_u32 = |s: &[u8]| u32::from_le_bytes([s[0], s[1], s[2], s[3]]);

    if take(8)? != BLOB_MAGIC {
        return Err(corrupt("bad magic"));
    }
    if read_u32(take(4)?) != BLOB_VERSION {
        return Err(corrupt("unsupported version"));
    }
    let count = read_u32(take(4)?) as usize;
    if count != expected_nodes {
        return Err(corrupt("node count mismatch"));
    }
    let mut links = Vec::with_capacity(count);
    for _ in 0..count {
        let levels = read_u32(take(4)?) as usize;
        if levels > MAX_LEVEL_CAP + 1 {
            return Err(corrupt("level count out of range"));
        }
        let mut node = Vec::with_capacity(levels);
        for _ in 0..levels {
            let len = read_u32(take(4)?) as usize;
            let mut layer = Vec::with_capacity(len);
            for _ in 0..len {
                let nb = read_u32(take(4)?);
                if nb as usize >= count {
                    return Err(corrupt("neighbor id out of range"));
                }
                layer.push(nb);
            }
            node.push(layer);
        }
        links.push(node);
    }
    if pos != blob.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(links)
}

impl VectorSearch for HnswIndex {
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
        if self.ids.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        let ef = self.params.ef_search.max(k);
        let mut ep = self.entry;
        for l in (1..=self.max_level).rev() {
            if let Some(best) = self.search_layer(query, ep, 1, l).first() {
                ep = best.node;
            }
        }
        let found = self.search_layer(query, ep, ef, 0);
        let mut hits: Vec<SearchHit> = found
            .into_iter()
            .map(|s| SearchHit {
                row: s.node as usize,
                cve_id: self.ids[s.node as usize].clone(),
                similarity: s.sim,
            })
            .collect();
        hits.sort_by(hit_order);
        hits.truncate(k);
        Ok(hits)
    }
}
