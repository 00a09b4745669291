//! Single-file JSON configuration for the command-line binary.
//!
//! Everything tunable lives in one document: decompiler commands, fusion
//! weights, extra stop tokens, model names and prices, rate budgets, and
//! backend selection. The effective configuration is serialized into every
//! report, so a report always records the settings that produced it.
//! Endpoint URLs may come from the file or the environment; API keys come
//! from the environment only and are never written to disk.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompile::{default_specs, DecompilerSpec};
use crate::embeddings::EmbeddingConfig;
use crate::llm::{LlmClientConfig, PriceTable, LLM_API_KEY_ENV, LLM_URL_ENV};
use crate::rerank::FusionConfig;
use crate::vector_index::RETRIEVAL_DEPTH;

/// Environment variable naming the remote embedding endpoint.
pub const EMBED_URL_ENV: &str = "MALCVE_EMBED_URL";
/// Environment variable holding the embedding API key.
pub const EMBED_API_KEY_ENV: &str = "MALCVE_EMBED_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which chat backend the binary talks to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlmBackendKind {
    /// OpenAI-compatible HTTP endpoint.
    Remote,
    /// Scripted responses from a local JSON file; no network.
    Mock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmBackendConfig {
    pub kind: LlmBackendKind,
    /// Response script path, required when `kind` is mock.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    /// Endpoint URL; `MALCVE_LLM_URL` overrides it when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub max_retries: u32,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        Self {
            kind: LlmBackendKind::Remote,
            script: None,
            url: None,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    /// Token budget per minute shared by chat and embedding calls;
    /// `null` disables rate limiting.
    pub tokens_per_minute: Option<u64>,
    /// Ceiling on simultaneously outstanding chat requests.
    pub max_in_flight: Option<usize>,
    /// Ceiling on sample downloads per minute.
    pub downloads_per_minute: Option<usize>,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            tokens_per_minute: Some(200_000),
            max_in_flight: None,
            downloads_per_minute: None,
        }
    }
}

/// Which search structure answers similarity queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexKind {
    /// Brute-force cosine ranking; exact and fast at KB scale.
    Exact,
    /// Approximate graph search for large knowledge bases.
    Hnsw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub decompilers: Vec<DecompilerSpec>,
    pub fusion: FusionConfig,
    /// Dropped from BM25 query tokens on top of the built-in stoplist.
    pub extra_stop_tokens: Vec<String>,
    pub llm: LlmClientConfig,
    pub llm_backend: LlmBackendConfig,
    pub embedding: EmbeddingConfig,
    pub prices: PriceTable,
    pub rate: RateConfig,
    pub index: IndexKind,
    /// Per-query hits fetched from the vector index before aggregation.
    pub retrieval_depth: usize,
    /// Directory with prompt template overrides; built-ins fill gaps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompts_dir: Option<PathBuf>,
    /// URL with a `{sha256}` placeholder for fetching samples by hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub download_url_template: Option<String>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            decompilers: default_specs(),
            fusion: FusionConfig::default(),
            extra_stop_tokens: Vec::new(),
            llm: LlmClientConfig::default(),
            llm_backend: LlmBackendConfig::default(),
            embedding: EmbeddingConfig::default(),
            prices: PriceTable::default(),
            rate: RateConfig::default(),
            index: IndexKind::Exact,
            retrieval_depth: RETRIEVAL_DEPTH,
            prompts_dir: None,
            download_url_template: None,
        }
    }
}

fn env_nonempty(name: &str) -> Option<String> {
    env::var(name).ok().filter(|v| !v.trim().is_empty())
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Loads the given file, or the defaults when no path is supplied.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.retrieval_depth == 0 {
            return Err(ConfigError::Invalid(
                "retrieval_depth must be at least 1".to_string(),
            ));
        }
        if self.fusion.output_top_n == 0 {
            return Err(ConfigError::Invalid(
                "fusion.output_top_n must be at least 1".to_string(),
            ));
        }
        if self.fusion.weight_semantic < 0.0 || self.fusion.weight_bm25 < 0.0 {
            return Err(ConfigError::Invalid(
                "fusion weights must be nonnegative".to_string(),
            ));
        }
        if self.llm_backend.kind == LlmBackendKind::Mock && self.llm_backend.script.is_none() {
            return Err(ConfigError::Invalid(
                "llm_backend.kind is mock but no script path is set".to_string(),
            ));
        }
        if let Some(template) = &self.download_url_template {
            if !template.contains("{sha256}") {
                return Err(ConfigError::Invalid(
                    "download_url_template must contain {sha256}".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// The document embedded in report metadata. API keys never appear in
    /// the config, so the snapshot is safe to persist.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Chat endpoint: environment first, then the config file.
    pub fn resolve_llm_url(&self) -> Option<String> {
        env_nonempty(LLM_URL_ENV).or_else(|| self.llm_backend.url.clone())
    }

    pub fn resolve_llm_api_key(&self) -> Option<String> {
        env_nonempty(LLM_API_KEY_ENV)
    }

    /// Embedding endpoint: environment only; the local provider needs none.
    pub fn resolve_embed_url(&self) -> Option<String> {
        env_nonempty(EMBED_URL_ENV)
    }

    pub fn resolve_embed_api_key(&self) -> Option<String> {
        env_nonempty(EMBED_API_KEY_ENV)
    }
}
