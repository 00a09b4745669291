//! NVD REST API client with pagination and retry handling.

use super::feed::{parse_feed, parse_page_meta, FeedEntry, FeedError};
use crate::clock::Clock;
use crate::transport::{Header, Transport, TransportError};
use chrono::{DateTime, SecondsFormat, Utc};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

/// Env var holding the NVD API key; sent as the `apiKey` request header.
pub const NVD_API_KEY_ENV: &str = "MALCVE_NVD_API_KEY";

pub const DEFAULT_NVD_BASE_URL: &str = "https://services.nvd.nist.gov/rest/json/cves/2.0";

#[derive(Debug, Error)]
pub enum NvdError {
    #[error("NVD request failed after {attempts} attempts: {source}")]
    Exhausted {
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error("pagination did not advance at startIndex {start_index}")]
    Stuck { start_index: u64 },
}

/// A source of NVD feed pages. The HTTP client implements it for real runs;
/// tests script it.
pub trait NvdFeedSource: Send + Sync {
    fn fetch_page(
        &self,
        start_index: u64,
        modified_since: Option<DateTime<Utc>>,
    ) -> Result<serde_json::Value, NvdError>;
}

pub struct HttpNvdSource {
    base_url: String,
    api_key: Option<String>,
    page_size: u64,
    max_retries: u32,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
}

impl HttpNvdSource {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            base_url: base_url.into(),
            api_key,
            page_size: 2000,
            max_retries: 3,
            transport,
            clock,
        }
    }

    pub fn with_page_size(mut self, page_size: u64) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    fn headers(&self) -> Vec<Header> {
        match &self.api_key {
            Some(key) => vec![("apiKey".to_string(), key.clone())],
            None => Vec::new(),
        }
    }

    fn page_url(&self, start_index: u64, modified_since: Option<DateTime<Utc>>) -> String {
        let mut url = format!(
            "{}?startIndex={}&resultsPerPage={}",
            self.base_url, start_index, self.page_size
        );
        if let Some(since) = modified_since {
            let start = since.to_rfc3339_opts(SecondsFormat::Millis, true);
            let end = self
                .clock
                .now()
                .to_rfc3339_opts(SecondsFormat::Millis, true);
            url.push_str(&format!("&lastModStartDate={start}&lastModEndDate={end}"));
        }
        url
    }
}

impl NvdFeedSource for HttpNvdSource {
    fn fetch_page(
        &self,
        start_index: u64,
        modified_since: Option<DateTime<Utc>>,
    ) -> Result<serde_json::Value, NvdError> {
        let url = self.page_url(start_index, modified_since);
        let headers = self.headers();
        let mut attempt = 0u32;
        loop {
            match self.transport.get_json(&url, &headers) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    self.clock
                        .sleep(Duration::from_millis(1000u64.saturating_mul(1 << attempt)));
                    attempt += 1;
                }
                Err(e) => {
                    return Err(NvdError::Exhausted {
                        attempts: attempt + 1,
                        source: e,
                    })
                }
            }
        }
    }
}

/// Walks every page of a source and returns the concatenated entries.
pub fn fetch_all(
    source: &dyn NvdFeedSource,
    modified_since: Option<DateTime<Utc>>,
) -> Result<Vec<FeedEntry>, NvdError> {
    let mut entries = Vec::new();
    let mut start_index = 0u64;
    loop {
        let page = source.fetch_page(start_index, modified_since)?;
        let meta = parse_page_meta(&page)?;
        let batch = parse_feed(&page)?;
        let advanced = (batch.len() as u64).max(meta.results_per_page);
        entries.extend(batch);
        let next = start_index + advanced;
        if next >= meta.total_results || advanced == 0 {
            if advanced == 0 && next < meta.total_results {
                return Err(NvdError::Stuck { start_index });
            }
            return Ok(entries);
        }
        start_index = next;
    }
}
