//! Chat-completion backends.
//!
//! All three pipeline prompts go through the `LlmBackend` trait, so the same
//! client logic runs against a remote HTTP endpoint or the scripted mock.
//! The remote backend speaks the common chat-completions wire shape: request
//! `{model, messages}`, response `{choices: [{message: {content}}]}`.

use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::clock::Clock;
use crate::llm::rate::RateError;
use crate::transport::{Header, Transport, TransportError};

/// Environment variable naming the chat-completion endpoint URL.
pub const LLM_URL_ENV: &str = "MALCVE_LLM_URL";
/// Environment variable holding the bearer token for that endpoint.
pub const LLM_API_KEY_ENV: &str = "MALCVE_LLM_API_KEY";

/// Base delay for exponential retry backoff.
const RETRY_BASE_DELAY: Duration = Duration::from_millis(500);

/// Which pipeline prompt a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStep {
    Summarize,
    Queries,
    Predict,
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub step: PromptStep,
    pub model: String,
    pub prompt: String,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("prompt of {prompt_tokens} tokens exceeds the context limit of {limit} tokens")]
    ContextTooLarge { prompt_tokens: u64, limit: u64 },
    #[error("response failed schema validation: {message}")]
    Schema { message: String, raw: String },
    #[error("llm request failed after {attempts} attempts: {source}")]
    Exhausted {
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("llm response body not in the expected shape: {0}")]
    BadResponse(String),
    #[error("no mock rule matched a {step:?} request")]
    NoMockRule { step: PromptStep },
    #[error("mock script invalid: {0}")]
    BadScript(String),
    #[error("prediction requires between 1 and 10 candidates, got {0}")]
    CandidateCount(usize),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

/// HTTP chat-completion backend with retry on transient failures.
pub struct RemoteBackend {
    url: String,
    api_key: Option<String>,
    max_retries: u32,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
}

impl RemoteBackend {
    pub fn new(
        url: &str,
        api_key: Option<&str>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            url: url.to_string(),
            api_key: api_key.map(str::to_string),
            max_retries: 3,
            transport,
            clock,
        }
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    fn headers(&self) -> Vec<Header> {
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(key) = &self.api_key {
            headers.push(("Authorization".to_string(), format!("Bearer {key}")));
        }
        headers
    }
}

impl LlmBackend for RemoteBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let headers = self.headers();
        let mut attempt = 0u32;
        loop {
            match self.transport.post_json(&self.url, &headers, &body) {
                Ok(value) => {
                    let content = value
                        .pointer("/choices/0/message/content")
                        .and_then(|v| v.as_str())
                        .ok_or_else(|| {
                            LlmError::BadResponse("missing choices[0].message.content".to_string())
                        })?;
                    return Ok(content.to_string());
                }
                Err(err) if err.is_retryable() && attempt < self.max_retries => {
                    self.clock.sleep(RETRY_BASE_DELAY * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(source) => {
                    return Err(LlmError::Exhausted {
                        attempts: attempt + 1,
                        source,
                    });
                }
            }
        }
    }
}
