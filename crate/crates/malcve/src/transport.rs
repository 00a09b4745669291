//! Minimal HTTP transport used by the remote embedding, LLM, NVD, and
//! download clients. A single trait keeps every network-facing component
//! swappable for a scripted stand-in in tests; retry policies live in the
//! clients, not here.

use serde_json::Value;
use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("invalid response body: {0}")]
    Body(String),
}

impl TransportError {
    /// Retryable failures: transient network errors, 429, and 5xx.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Network(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Body(_) => false,
        }
    }
}

pub type Header = (String, String);

/// One-shot HTTP operations. Implementations make a single attempt; callers
/// own retries and backoff.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[Header],
        body: &Value,
    ) -> Result<Value, TransportError>;

    fn get_json(&self, url: &str, headers: &[Header]) -> Result<Value, TransportError>;

    fn get_bytes(&self, url: &str, headers: &[Header]) -> Result<Vec<u8>, TransportError>;
}

/// Production transport over a blocking reqwest client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

fn check_status(
    resp: reqwest::blocking::Response,
) -> Result<reqwest::blocking::Response, TransportError> {
    let status = resp.status();
    if status.is_success() {
        Ok(resp)
    } else {
        let body = resp.text().unwrap_or_default();
        Err(TransportError::Status {
            status: status.as_u16(),
            body: body.chars().take(512).collect(),
        })
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[Header],
        body: &Value,
    ) -> Result<Value, TransportError> {
        let mut req = self.client.post(url).json(body);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let resp = req
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        check_status(resp)?
            .json()
            .map_err(|e| TransportError::Body(e.to_string()))
    }

    fn get_json(&self, url: &str, headers: &[Header]) -> Result<Value, TransportError> {
        let mut req = self.client.get(url);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let resp = req
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        check_status(resp)?
            .json()
            .map_err(|e| TransportError::Body(e.to_string()))
    }

    fn get_bytes(&self, url: &str, headers: &[Header]) -> Result<Vec<u8>, TransportError> {
        let mut req = self.client.get(url);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let resp = req
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        check_status(resp)?
            .bytes()
            .map(|b| b.to_vec())
            .map_err(|e| TransportError::Body(e.to_string()))
    }
}

/// Scripted response for [`ScriptedTransport`].
pub enum ScriptedReply {
    Json(Value),
    Bytes(Vec<u8>),
    Fail { status: u16 },
    NetworkDown,
}

/// Deterministic transport for tests and examples: replies are served in
/// order and every request is counted.
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<ScriptedReply>>,
    requests: AtomicUsize,
    /// URLs seen, for request-shape assertions.
    pub seen_urls: Mutex<Vec<String>>,
}

impl ScriptedTransport {
    pub fn new(replies: Vec<ScriptedReply>) -> Self {
        Self {
            replies: Mutex::new(replies.into()),
            requests: AtomicUsize::new(0),
            seen_urls: Mutex::new(Vec::new()),
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn next(&self, url: &str) -> Result<ScriptedReply, TransportError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        self.seen_urls.lock().unwrap().push(url.to_string());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| TransportError::Network("scripted transport exhausted".into()))
    }

    fn next_json(&self, url: &str) -> Result<Value, TransportError> {
        match self.next(url)? {
            ScriptedReply::Json(v) => Ok(v),
            ScriptedReply::Bytes(_) => Err(TransportError::Body("expected json reply".into())),
            ScriptedReply::Fail { status } => Err(TransportError::Status {
                status,
                body: String::new(),
            }),
            ScriptedReply::NetworkDown => Err(TransportError::Network("scripted outage".into())),
        }
    }
}

impl Transport for ScriptedTransport {
    fn post_json(
        &self,
        url: &str,
        _headers: &[Header],
        _body: &Value,
    ) -> Result<Value, TransportError> {
        self.next_json(url)
    }

    fn get_json(&self, url: &str, _headers: &[Header]) -> Result<Value, TransportError> {
        self.next_json(url)
    }

    fn get_bytes(&self, url: &str, _headers: &[Header]) -> Result<Vec<u8>, TransportError> {
        match self.next(url)? {
            ScriptedReply::Bytes(b) => Ok(b),
            ScriptedReply::Json(_) => Err(TransportError::Body("expected byte reply".into())),
            ScriptedReply::Fail { status } => Err(TransportError::Status {
                status,
                body: String::new(),
            }),
            ScriptedReply::NetworkDown => Err(TransportError::Network("scripted outage".into())),
        }
    }
}
