//! Persistent CVE knowledge base.
//!
//! On-disk layout inside the KB directory:
//!
//! - `manifest.json`: format version, embedding model, dimension, record
//!   count, timestamps.
//! - `records.jsonl`: one [`CveRecord`] per line; line `i` corresponds to
//!   vector row `i`.
//! - `vectors.bin`: row-major little-endian f32 embedding matrix.
//! - `.lock`: writer lease, removed on drop.
//!
//! Ingest is incremental: unchanged descriptions are skipped without
//! re-embedding, changed ones are re-embedded in place, and new CVEs are
//! appended. Files are rewritten only when contents changed, so re-running
//! an identical ingest leaves every byte on disk identical.

pub mod feed;
pub mod nvd_client;

use crate::clock::Clock;
use crate::embeddings::EmbeddingProvider;
use chrono::{DateTime, Utc};
use feed::{FeedEntry, FeedError};
use nvd_client::{NvdError, NvdFeedSource};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";
pub const LOCK_FILE: &str = ".lock";
pub const KB_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("knowledge base is already locked by another writer: {path}")]
    Locked { path: PathBuf },
    #[error("knowledge base opened read-only; no writer lease held")]
    ReadOnly,
    #[error("knowledge base is corrupt: {0}")]
    Corrupt(String),
    #[error(
        "provider {provider} ({provider_dim}-dim) does not match KB model {kb} ({kb_dim}-dim)"
    )]
    ModelMismatch {
        kb: String,
        kb_dim: usize,
        provider: String,
        provider_dim: usize,
    },
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error(transparent)]
    Nvd(#[from] NvdError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KbError + '_ {
    move |source| KbError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CveRecord {
    pub cve_id: String,
    pub description: String,
    pub description_sha256: String,
    pub cwe_ids: Vec<String>,
    pub cvss_score: Option<f64>,
    pub cvss_severity: Option<String>,
    pub published: Option<DateTime<Utc>>,
    pub last_modified: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbManifest {
    pub format_version: u32,
    pub embedding_model: String,
    pub dim: usize,
    pub record_count: usize,
    pub created_at: DateTime<Utc>,
    pub last_refresh: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub cve_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub inserted: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub skipped_rejected: usize,
    pub skipped_no_description: usize,
    pub failed_embeddings: Vec<SkippedEntry>,
}

impl IngestStats {
    pub fn summary(&self) -> String {
        format!(
            "inserted {} updated {} unchanged {} rejected {} no-description {} embed-failures {}",
            self.inserted,
            self.updated,
            self.unchanged,
            self.skipped_rejected,
            self.skipped_no_description,
            self.failed_embeddings.len()
        )
    }
}

/// Writer lease: an exclusive lock file removed when the lease drops.
struct LockFile {
    path: PathBuf,
}

impl LockFile {
    fn acquire(path: PathBuf) -> Result<Self, KbError> {
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(KbError::Locked { path })
            }
            Err(e) => Err(KbError::Io { path, source: e }),
        }
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct KnowledgeBase {
    dir: PathBuf,
    manifest: KbManifest,
    records: Vec<CveRecord>,
    /// Row-major embedding matrix; row `i` belongs to `records[i]`.
    vectors: Vec<f32>,
    by_id: HashMap<String, usize>,
    cwe_map: HashMap<String, Vec<usize>>,
    dirty_data: bool,
    dirty_manifest: bool,
    lease: Option<LockFile>,
}

impl KnowledgeBase {
    /// Creates a new KB directory with a writer lease. `persist` writes the
    /// initial (empty) files.
    pub fn create(
        dir: impl Into<PathBuf>,
        embedding_model: impl Into<String>,
        dim: usize,
        clock: &dyn Clock,
    ) -> Result<Self, KbError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            return Err(KbError::Corrupt(format!(
                "{} already exists; open it instead of re-creating",
                manifest_path.display()
            )));
        }
        let lease = LockFile::acquire(dir.join(LOCK_FILE))?;
        Ok(Self {
            dir,
            manifest: KbManifest {
                format_version: KB_FORMAT_VERSION,
                embedding_model: embedding_model.into(),
                dim,
                record_count: 0,
                created_at: clock.now(),
                last_refresh: None,
            },
            records: Vec::new(),
            vectors: Vec::new(),
            by_id: HashMap::new(),
            cwe_map: HashMap::new(),
            dirty_data: true,
            dirty_manifest: true,
            lease: Some(lease),
        })
    }

    /// Opens an existing KB read-only. Verifies that the manifest, record
    /// lines, and vector bytes agree.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, KbError> {
        Self::open_inner(dir.into(), None)
    }

    /// Opens an existing KB and takes the writer lease.
    pub fn open_for_write(dir: impl Into<PathBuf>) -> Result<Self, KbError> {
        let dir = dir.into();
        let lease = LockFile::acquire(dir.join(LOCK_FILE))?;
        Self::open_inner(dir, Some(lease))
    }

    fn open_inner(dir: PathBuf, lease: Option<LockFile>) -> Result<Self, KbError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest_raw = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: KbManifest =
            serde_json::from_str(&manifest_raw).map_err(|e| KbError::Json {
                path: manifest_path.clone(),
                message: e.to_string(),
            })?;
        if manifest.format_version != KB_FORMAT_VERSION {
            return Err(KbError::Corrupt(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }

        let records_path = dir.join(RECORDS_FILE);
        let records_raw = fs::read_to_string(&records_path).map_err(io_err(&records_path))?;
        let mut records = Vec::new();
        for (lineno, line) in records_raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: CveRecord = serde_json::from_str(line).map_err(|e| KbError::Json {
                path: records_path.clone(),
                message: format!("line {}: {}", lineno + 1, e),
            })?;
            records.push(record);
        }
        if records.len() != manifest.record_count {
            return Err(KbError::Corrupt(format!(
                "manifest says {} records but {} found",
                manifest.record_count,
                records.len()
            )));
        }

        let vectors_path = dir.join(VECTORS_FILE);
        let bytes = fs::read(&vectors_path).map_err(io_err(&vectors_path))?;
        let expected = records.len() * manifest.dim * 4;
        if bytes.len() != expected {
            return Err(KbError::Corrupt(format!(
                "vectors.bin is {} bytes, expected {}",
                bytes.len(),
                expected
            )));
        }
        let vectors: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();

        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.cve_id.clone(), i).is_some() {
                return Err(KbError::Corrupt(format!("duplicate record {}", r.cve_id)));
            }
        }

        let mut kb = Self {
            dir,
            manifest,
            records,
            vectors,
            by_id,
            cwe_map: HashMap::new(),
            dirty_data: false,
            dirty_manifest: false,
            lease,
        };
        kb.rebuild_cwe_map();
        Ok(kb)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &KbManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.manifest.dim
    }

    pub fn records(&self) -> &[CveRecord] {
        &self.records
    }

    pub fn record(&self, row: usize) -> &CveRecord {
        &self.records[row]
    }

    pub fn vector_row(&self, row: usize) -> &[f32] {
        let d = self.manifest.dim;
        &self.vectors[row * d..(row + 1) * d]
    }

    /// The whole embedding matrix as (flat data, dim).
    pub fn vector_matrix(&self) -> (&[f32], usize) {
        (&self.vectors, self.manifest.dim)
    }

    pub fn get(&self, cve_id: &str) -> Option<&CveRecord> {
        self.by_id.get(cve_id).map(|&i| &self.records[i])
    }

    pub fn row_of(&self, cve_id: &str) -> Option<usize> {
        self.by_id.get(cve_id).copied()
    }

    /// Records tagged with the given CWE, ordered by CVE id.
    pub fn get_by_cwe(&self, cwe_id: &str) -> Vec<&CveRecord> {
        self.cwe_map
            .get(cwe_id)
            .map(|rows| rows.iter().map(|&i| &self.records[i]).collect())
            .unwrap_or_default()
    }

    fn rebuild_cwe_map(&mut self) {
        let mut map: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in self.records.iter().enumerate() {
            for cwe in &r.cwe_ids {
                map.entry(cwe.clone()).or_default().push(i);
            }
        }
        for rows in map.values_mut() {
            rows.sort_by(|&a, &b| self.records[a].cve_id.cmp(&self.records[b].cve_id));
        }
        self.cwe_map = map;
    }

    fn check_provider(&self, provider: &dyn EmbeddingProvider) -> Result<(), KbError> {
        if provider.model_id() != self.manifest.embedding_model
            || provider.dim() != self.manifest.dim
        {
            return Err(KbError::ModelMismatch {
                kb: self.manifest.embedding_model.clone(),
                kb_dim: self.manifest.dim,
                provider: provider.model_id().to_string(),
                provider_dim: provider.dim(),
            });
        }
        Ok(())
    }

    /// Applies feed entries: append new CVEs, re-embed changed descriptions,
    /// skip the rest. Embedding failures are reported in the stats and do
    /// not abort the run.
    pub fn ingest(
        &mut self,
        entries: &[FeedEntry],
        provider: &dyn EmbeddingProvider,
    ) -> Result<IngestStats, KbError> {
        if self.lease.is_none() {
            return Err(KbError::ReadOnly);
        }
        self.check_provider(provider)?;
        let mut stats = IngestStats::default();
        let mut cwe_dirty = false;

        for entry in entries {
            if entry.is_rejected() {
                stats.skipped_rejected += 1;
                continue;
            }
            let Some(description) = entry
                .description
                .as_deref()
                .filter(|d| !d.trim().is_empty())
            else {
                stats.skipped_no_description += 1;
                continue;
            };
            let hash = sha256_hex(description.as_bytes());

            match self.by_id.get(&entry.cve_id).copied() {
                Some(row) if self.records[row].description_sha256 == hash => {
                    stats.unchanged += 1;
                }
                Some(row) => match provider.embed_text(description) {
                    Ok(vector) => {
                        let d = self.manifest.dim;
                        self.vectors[row * d..(row + 1) * d].copy_from_slice(&vector);
                        self.records[row] = make_record(entry, description, hash);
                        stats.updated += 1;
                        self.dirty_data = true;
                        cwe_dirty = true;
                    }
                    Err(e) => stats.failed_embeddings.push(SkippedEntry {
                        cve_id: entry.cve_id.clone(),
                        reason: e.to_string(),
                    }),
                },
                None => match provider.embed_text(description) {
                    Ok(vector) => {
                        self.by_id.insert(entry.cve_id.clone(), self.records.len());
                        self.records.push(make_record(entry, description, hash));
                        self.vectors.extend_from_slice(&vector);
                        stats.inserted += 1;
                        self.dirty_data = true;
                        cwe_dirty = true;
                    }
                    Err(e) => stats.failed_embeddings.push(SkippedEntry {
                        cve_id: entry.cve_id.clone(),
                        reason: e.to_string(),
                    }),
                },
            }
        }

        if cwe_dirty {
            self.rebuild_cwe_map();
        }
        Ok(stats)
    }

    /// Pulls every page from the source (optionally since a modification
    /// date), ingests it, and stamps `last_refresh` even when nothing
    /// changed.
    pub fn refresh(
        &mut self,
        source: &dyn NvdFeedSource,
        provider: &dyn EmbeddingProvider,
        modified_since: Option<DateTime<Utc>>,
        clock: &dyn Clock,
    ) -> Result<IngestStats, KbError> {
        if self.lease.is_none() {
            return Err(KbError::ReadOnly);
        }
        let entries = nvd_client::fetch_all(source, modified_since)?;
        let stats = self.ingest(&entries, provider)?;
        self.manifest.last_refresh = Some(clock.now());
        self.dirty_manifest = true;
        Ok(stats)
    }

    /// Writes changed files atomically (temp file + rename). Untouched files
    /// are not rewritten.
    pub fn persist(&mut self) -> Result<(), KbError> {
        if self.lease.is_none() {
            return Err(KbError::ReadOnly);
        }
        if self.dirty_data {
            let mut jsonl = String::new();
            for r in &self.records {
                jsonl.push_str(&serde_json::to_string(r).expect("record serializes"));
                jsonl.push('\n');
            }
            write_atomic(&self.dir, RECORDS_FILE, jsonl.as_bytes())?;

            let mut bin = Vec::with_capacity(self.vectors.len() * 4);
            for &x in &self.vectors {
                bin.extend_from_slice(&x.to_le_bytes());
            }
            write_atomic(&self.dir, VECTORS_FILE, &bin)?;

            self.manifest.record_count = self.records.len();
            self.dirty_manifest = true;
            self.dirty_data = false;
        }
        if self.dirty_manifest {
            let mut json =
                serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
            json.push('\n');
            write_atomic(&self.dir, MANIFEST_FILE, json.as_bytes())?;
            self.dirty_manifest = false;
        }
        Ok(())
    }
}

fn make_record(entry: &FeedEntry, description: &str, hash: String) -> CveRecord {
    CveRecord {
        cve_id: entry.cve_id.clone(),
        description: description.to_string(),
        description_sha256: hash,
        cwe_ids: entry.cwe_ids.clone(),
        cvss_score: entry.cvss_score,
        cvss_severity: entry.cvss_severity.clone(),
        published: entry.published,
        last_modified: entry.last_modified,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), KbError> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let dest = dir.join(name);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &dest).map_err(io_err(&dest))?;
    Ok(())
}

/// Loads a feed document from a local path or, for `http(s)` URLs, over the
/// given transport.
pub fn load_feed_value(
    location: &str,
    transport: &dyn crate::transport::Transport,
) -> Result<serde_json::Value, KbError> {
    if location.starts_with("http://") || location.starts_with("https://") {
        transport
            .get_json(location, &[])
            .map_err(|e| KbError::Json {
                path: PathBuf::from(location),
                message: e.to_string(),
            })
    } else {
        let path = Path::new(location);
        let raw = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&raw).map_err(|e| KbError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
