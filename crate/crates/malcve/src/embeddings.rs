//! Text embedding providers.
//!
//! Two implementations sit behind one trait: a remote HTTP provider for real
//! runs and a deterministic local provider (hashed bag of tokens) that makes
//! tests and offline examples reproducible without a network.

use crate::clock::Clock;
use crate::llm::cost::{CharsPer4, TokenEstimator};
use crate::llm::rate::TokenRateLimiter;
use crate::transport::{Transport, TransportError};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

pub const DEFAULT_DIM: usize = 1536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingProviderKind {
    Remote,
    LocalDeterministic,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbeddingConfig {
    pub provider: EmbeddingProviderKind,
    pub model_id: String,
    pub dim: usize,
    pub request_batch_size: usize,
    pub max_retries: u32,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: EmbeddingProviderKind::LocalDeterministic,
            model_id: "text-embedding-3-small".to_string(),
            dim: DEFAULT_DIM,
            request_batch_size: 64,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text (batch index {index})")]
    EmptyText { index: usize },
    #[error("provider returned {got} vectors for {expected} inputs")]
    CountMismatch { expected: usize, got: usize },
    #[error("provider returned a {got}-dim vector, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("provider returned a non-finite component at dim {dim}")]
    NonFinite { dim: usize },
    #[error("embedding request failed for batch starting at index {index}: {source}")]
    Transport {
        index: usize,
        #[source]
        source: TransportError,
    },
    #[error("malformed embedding response: {0}")]
    BadResponse(String),
    #[error("rate limit: {0}")]
    Rate(#[from] crate::llm::rate::RateError),
}

pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<Vec<f32>, EmbedError>;

    /// Embeds many texts. Errors carry the index of the first offending input.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                self.embed_text(t).map_err(|e| match e {
                    EmbedError::EmptyText { .. } => EmbedError::EmptyText { index: i },
                    other => other,
                })
            })
            .collect()
    }
}

/// Cosine similarity with f64 accumulation. Zero-norm inputs yield 0.0,
/// never NaN.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Scales a vector to unit L2 norm in place. All-zero vectors are left as
/// zeros rather than divided into NaN.
pub fn l2_normalize(v: &mut [f32]) {
    let norm: f64 = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / norm) as f32;
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic offline embedder: lowercase the text, split on
/// non-alphanumeric boundaries, hash each token into one of `dim` buckets,
/// and L2-normalize the bucket counts. Shared tokens produce overlapping
/// buckets, so lexically similar texts get high cosine similarity.
pub struct LocalHashEmbedder {
    model_id: String,
    dim: usize,
}

impl LocalHashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            model_id: "local-hash-v1".to_string(),
            dim,
        }
    }

    pub fn with_model_id(dim: usize, model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            dim,
        }
    }
}

impl EmbeddingProvider for LocalHashEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText { index: 0 });
        }
        let mut v = vec![0.0f32; self.dim];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            let bucket = (fnv1a64(token.as_bytes()) % self.dim as u64) as usize;
            v[bucket] += 1.0;
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct RemoteResponse {
    data: Vec<RemoteDatum>,
}

#[derive(Deserialize)]
struct RemoteDatum {
    embedding: Vec<f32>,
}

/// HTTP embedding provider. Splits inputs into `request_batch_size` chunks,
/// retries retryable transport failures with exponential backoff, and
/// optionally meters token throughput through a shared rate limiter.
pub struct RemoteEmbedder {
    config: EmbeddingConfig,
    url: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    rate: Option<Arc<TokenRateLimiter>>,
}

impl RemoteEmbedder {
    pub fn new(
        config: EmbeddingConfig,
        url: impl Into<String>,
        api_key: Option<String>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            config,
            url: url.into(),
            api_key,
            transport,
            clock,
            rate: None,
        }
    }

    pub fn with_rate_limiter(mut self, rate: Arc<TokenRateLimiter>) -> Self {
        self.rate = Some(rate);
        self
    }

    fn headers(&self) -> Vec<(String, String)> {
        match &self.api_key {
            Some(key) => vec![("Authorization".to_string(), format!("Bearer {key}"))],
            None => Vec::new(),
        }
    }

    fn post_chunk(&self, chunk: &[String], base_index: usize) -> Result<Vec<Vec<f32>>, EmbedError> {
        if let Some(rate) = &self.rate {
            let estimator = CharsPer4;
            let tokens: u64 = chunk.iter().map(|t| estimator.estimate(t)).sum();
            rate.acquire(tokens)?;
        }
        let body = serde_json::to_value(RemoteRequest {
            model: &self.config.model_id,
            input: chunk,
        })
        .expect("embedding request serializes");

        let mut attempt = 0u32;
        let value = loop {
            match self.transport.post_json(&self.url, &self.headers(), &body) {
                Ok(v) => break v,
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let backoff = Duration::from_millis(500u64.saturating_mul(1 << attempt));
                    self.clock.sleep(backoff);
                    attempt += 1;
                }
                Err(e) => {
                    return Err(EmbedError::Transport {
                        index: base_index,
                        source: e,
                    })
                }
            }
        };

        let parsed: RemoteResponse =
            serde_json::from_value(value).map_err(|e| EmbedError::BadResponse(e.to_string()))?;
        if parsed.data.len() != chunk.len() {
            return Err(EmbedError::CountMismatch {
                expected: chunk.len(),
                got: parsed.data.len(),
            });
        }
        let mut out = Vec::with_capacity(parsed.data.len());
        for datum in parsed.data {
            if datum.embedding.len() != self.config.dim {
                return Err(EmbedError::DimMismatch {
                    expected: self.config.dim,
                    got: datum.embedding.len(),
                });
            }
            if let Some(d) = datum.embedding.iter().position(|x| !x.is_finite()) {
                return Err(EmbedError::NonFinite { dim: d });
            }
            out.push(datum.embedding);
        }
        Ok(out)
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        let batch = [text.to_string()];
        let mut vecs = self.embed_batch(&batch)?;
        Ok(vecs.remove(0))
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText { index: i });
        }
        let chunk_size = self.config.request_batch_size.max(1);
        let mut out = Vec::with_capacity(texts.len());
        for (chunk_idx, chunk) in texts.chunks(chunk_size).enumerate() {
            out.extend(self.post_chunk(chunk, chunk_idx * chunk_size)?);
        }
        Ok(out)
    }
}

/// Builds a provider from config. Remote settings come from the caller so
/// env lookup stays in the config layer.
pub fn build_provider(
    config: &EmbeddingConfig,
    remote_url: Option<String>,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
) -> Result<Arc<dyn EmbeddingProvider>, EmbedError> {
    match config.provider {
        EmbeddingProviderKind::LocalDeterministic => Ok(Arc::new(
            LocalHashEmbedder::with_model_id(config.dim, config.model_id.clone()),
        )),
        EmbeddingProviderKind::Remote => {
            let url = remote_url.ok_or_else(|| {
                EmbedError::BadResponse("remote provider selected but no endpoint URL given".into())
            })?;
            Ok(Arc::new(RemoteEmbedder::new(
                config.clone(),
                url,
                api_key,
                transport,
                clock,
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::transport::{ScriptedReply, ScriptedTransport};

    fn fake_embedding_reply(n: usize, dim: usize) -> serde_json::Value {
        let data: Vec<_> = (0..n)
            .map(|i| {
                let mut v = vec![0.0f32; dim];
                v[i % dim] = 1.0;
                serde_json::json!({ "embedding": v })
            })
            .collect();
        serde_json::json!({ "data": data })
    }

    #[test]
    fn local_embedder_is_deterministic() {
        let e = LocalHashEmbedder::new(256);
        let a = e
            .embed_text("Remote code execution in AWT components")
            .unwrap();
        let b = e
            .embed_text("Remote code execution in AWT components")
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 256);
    }

    #[test]
    fn local_embedder_unit_norm_and_self_similarity() {
        let e = LocalHashEmbedder::new(512);
        let v = e.embed_text("sun.awt.SunToolkit getField bypass").unwrap();
        let norm: f64 = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn similar_texts_score_higher_than_unrelated() {
        let e = LocalHashEmbedder::new(1024);
        let a = e.embed_text("java sandbox escape via reflection").unwrap();
        let b = e
            .embed_text("sandbox escape using reflection tricks")
            .unwrap();
        let c = e
            .embed_text("quarterly revenue spreadsheet totals")
            .unwrap();
        assert!(cosine(&a, &b) > cosine(&a, &c));
    }

    #[test]
    fn empty_text_is_rejected_with_index() {
        let e = LocalHashEmbedder::new(64);
        assert!(matches!(
            e.embed_text("   "),
            Err(EmbedError::EmptyText { .. })
        ));
        let batch = vec!["ok".to_string(), " ".to_string()];
        assert!(matches!(
            e.embed_batch(&batch),
            Err(EmbedError::EmptyText { index: 1 })
        ));
    }

    #[test]
    fn punctuation_only_text_embeds_to_zero_vector_without_nan() {
        let e = LocalHashEmbedder::new(64);
        let v = e.embed_text("...!!!").unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert_eq!(cosine(&v, &v), 0.0);
    }

    fn remote_fixture(
        replies: Vec<ScriptedReply>,
        batch: usize,
        retries: u32,
    ) -> (RemoteEmbedder, Arc<ScriptedTransport>) {
        let transport = Arc::new(ScriptedTransport::new(replies));
        let config = EmbeddingConfig {
            provider: EmbeddingProviderKind::Remote,
            model_id: "test-embed".to_string(),
            dim: 4,
            request_batch_size: batch,
            max_retries: retries,
        };
        let embedder = RemoteEmbedder::new(
            config,
            "https://embed.test/v1",
            Some("key".to_string()),
            transport.clone(),
            Arc::new(VirtualClock::at_epoch()),
        );
        (embedder, transport)
    }

    #[test]
    fn five_texts_at_batch_two_issue_three_requests() {
        let replies = vec![
            ScriptedReply::Json(fake_embedding_reply(2, 4)),
            ScriptedReply::Json(fake_embedding_reply(2, 4)),
            ScriptedReply::Json(fake_embedding_reply(1, 4)),
        ];
        let (embedder, transport) = remote_fixture(replies, 2, 0);
        let texts: Vec<String> = (0..5).map(|i| format!("text {i}")).collect();
        let vecs = embedder.embed_batch(&texts).unwrap();
        assert_eq!(vecs.len(), 5);
        assert_eq!(transport.request_count(), 3);
    }

    #[test]
    fn retryable_failure_then_success() {
        let replies = vec![
            ScriptedReply::Fail { status: 503 },
            ScriptedReply::Json(fake_embedding_reply(1, 4)),
        ];
        let (embedder, transport) = remote_fixture(replies, 8, 2);
        let v = embedder.embed_text("retry me").unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(transport.request_count(), 2);
    }

    #[test]
    fn non_retryable_failure_surfaces_transport_error() {
        let replies = vec![ScriptedReply::Fail { status: 400 }];
        let (embedder, transport) = remote_fixture(replies, 8, 3);
        let err = embedder.embed_text("bad request").unwrap_err();
        assert!(matches!(err, EmbedError::Transport { index: 0, .. }));
        assert_eq!(transport.request_count(), 1);
    }

    #[test]
    fn dim_mismatch_is_detected() {
        let replies = vec![ScriptedReply::Json(fake_embedding_reply(1, 3))];
        let (embedder, _) = remote_fixture(replies, 8, 0);
        assert!(matches!(
            embedder.embed_text("short vector"),
            Err(EmbedError::DimMismatch {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn empty_batch_is_ok_and_sends_nothing() {
        let (embedder, transport) = remote_fixture(Vec::new(), 2, 0);
        let vecs = embedder.embed_batch(&[]).unwrap();
        assert!(vecs.is_empty());
        assert_eq!(transport.request_count(), 0);
    }
}
