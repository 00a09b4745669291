//! Sample download client used by the batch download worker.
//!
//! Samples are fetched by sha256 from a URL template. Every payload is
//! re-hashed and must match the requested digest before it is handed to the
//! analysis queue; transient HTTP failures earn bounded retries.

use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::clock::Clock;
use crate::cve_kb::sha256_hex;
use crate::transport::{Header, Transport, TransportError};

/// Base delay for exponential retry backoff.
const RETRY_BASE_DELAY: Duration = Duration::from_millis(500);

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("download failed after {attempts} attempts: {source}")]
    Exhausted {
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("payload hash {actual} does not match requested {expected}")]
    HashMismatch { expected: String, actual: String },
}

pub trait Fetcher: Send + Sync {
    /// Fetches the sample with the given sha256; the payload is verified
    /// against that digest before being returned.
    fn fetch(&self, sha256: &str) -> Result<Vec<u8>, FetchError>;
}

/// Fetches `url_template` with `{sha256}` substituted, e.g.
/// `https://example.org/download/{sha256}`.
pub struct HttpFetcher {
    url_template: String,
    headers: Vec<Header>,
    max_retries: u32,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
}

impl HttpFetcher {
    pub fn new(
        url_template: &str,
        headers: Vec<Header>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            url_template: url_template.to_string(),
            headers,
            max_retries: 3,
            transport,
            clock,
        }
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, sha256: &str) -> Result<Vec<u8>, FetchError> {
        let url = self.url_template.replace("{sha256}", sha256);
        let mut attempt = 0u32;
        let payload = loop {
            match self.transport.get_bytes(&url, &self.headers) {
                Ok(bytes) => break bytes,
                Err(err) if err.is_retryable() && attempt < self.max_retries => {
                    self.clock.sleep(RETRY_BASE_DELAY * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(source) => {
                    return Err(FetchError::Exhausted {
                        attempts: attempt + 1,
                        source,
                    });
                }
            }
        };
        verify_payload(sha256, &payload)?;
        Ok(payload)
    }
}

pub fn verify_payload(expected_sha256: &str, payload: &[u8]) -> Result<(), FetchError> {
    let actual = sha256_hex(payload);
    if !actual.eq_ignore_ascii_case(expected_sha256) {
        return Err(FetchError::HashMismatch {
            expected: expected_sha256.to_lowercase(),
            actual,
        });
    }
    Ok(())
}
