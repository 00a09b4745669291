//! Parsing of NVD API 2.0 JSON feeds into flat entries.
//!
//! The feed is deserialized entry by entry so one malformed vulnerability
//! produces an error naming its index instead of rejecting the whole page.

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeedError {
    #[error("feed root is not an NVD response object: {0}")]
    Root(String),
    #[error("vulnerability entry {index} is malformed: {message}")]
    Entry { index: usize, message: String },
}

/// One vulnerability, flattened from the NVD schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedEntry {
    pub cve_id: String,
    pub status: Option<String>,
    /// First English description, if any.
    pub description: Option<String>,
    /// CWE identifiers of the form `CWE-<digits>`, sorted and deduplicated.
    pub cwe_ids: Vec<String>,
    pub cvss_score: Option<f64>,
    pub cvss_severity: Option<String>,
    pub published: Option<DateTime<Utc>>,
    pub last_modified: Option<DateTime<Utc>>,
}

impl FeedEntry {
    pub fn is_rejected(&self) -> bool {
        self.status
            .as_deref()
            .is_some_and(|s| s.eq_ignore_ascii_case("rejected"))
    }
}

/// Page-level bookkeeping for paginated fetches.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PageMeta {
    #[serde(default)]
    pub results_per_page: u64,
    #[serde(default)]
    pub start_index: u64,
    #[serde(default)]
    pub total_results: u64,
}

#[derive(Deserialize)]
struct Envelope {
    vulnerabilities: Vec<Value>,
}

#[derive(Deserialize)]
struct VulnWrapper {
    cve: CveItem,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CveItem {
    id: String,
    vuln_status: Option<String>,
    published: Option<String>,
    last_modified: Option<String>,
    #[serde(default)]
    descriptions: Vec<LangString>,
    metrics: Option<Metrics>,
    #[serde(default)]
    weaknesses: Vec<Weakness>,
}

#[derive(Deserialize)]
struct LangString {
    lang: String,
    value: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Metrics {
    #[serde(default)]
    cvss_metric_v31: Vec<CvssMetric>,
    #[serde(default)]
    cvss_metric_v40: Vec<CvssMetric>,
    #[serde(default)]
    cvss_metric_v30: Vec<CvssMetric>,
    #[serde(default)]
    cvss_metric_v2: Vec<CvssMetric>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CvssMetric {
    #[serde(rename = "type")]
    metric_type: Option<String>,
    cvss_data: Option<CvssData>,
    /// V2 metrics carry severity at this level rather than inside cvssData.
    base_severity: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CvssData {
    base_score: Option<f64>,
    base_severity: Option<String>,
}

#[derive(Deserialize)]
struct Weakness {
    #[serde(default)]
    description: Vec<LangString>,
}

pub fn parse_page_meta(root: &Value) -> Result<PageMeta, FeedError> {
    serde_json::from_value(root.clone()).map_err(|e| FeedError::Root(e.to_string()))
}

/// Parses a full NVD response (or any object with a `vulnerabilities` array)
/// into flat entries.
pub fn parse_feed(root: &Value) -> Result<Vec<FeedEntry>, FeedError> {
    let envelope: Envelope =
        serde_json::from_value(root.clone()).map_err(|e| FeedError::Root(e.to_string()))?;
    envelope
        .vulnerabilities
        .into_iter()
        .enumerate()
        .map(|(index, raw)| {
            let wrapper: VulnWrapper =
                serde_json::from_value(raw).map_err(|e| FeedError::Entry {
                    index,
                    message: e.to_string(),
                })?;
            Ok(flatten(wrapper.cve))
        })
        .collect()
}

fn flatten(item: CveItem) -> FeedEntry {
    let description = item
        .descriptions
        .iter()
        .find(|d| d.lang.eq_ignore_ascii_case("en"))
        .map(|d| d.value.clone());

    let mut cwe_ids: Vec<String> = item
        .weaknesses
        .iter()
        .flat_map(|w| w.description.iter())
        .filter(|d| d.lang.eq_ignore_ascii_case("en"))
        .map(|d| d.value.trim().to_string())
        .filter(|v| is_cwe_id(v))
        .collect();
    cwe_ids.sort();
    cwe_ids.dedup();

    let (cvss_score, cvss_severity) = item
        .metrics
        .as_ref()
        .and_then(pick_cvss)
        .unwrap_or((None, None));

    FeedEntry {
        cve_id: item.id,
        status: item.vuln_status,
        description,
        cwe_ids,
        cvss_score,
        cvss_severity,
        published: item.published.as_deref().and_then(parse_nvd_time),
        last_modified: item.last_modified.as_deref().and_then(parse_nvd_time),
    }
}

/// `CWE-<digits>` only; placeholders like `NVD-CWE-noinfo` are dropped.
fn is_cwe_id(value: &str) -> bool {
    value
        .strip_prefix("CWE-")
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Preference order: v3.1, v4.0, v3.0, v2. Within one version the metric
/// typed "Primary" wins over secondaries.
fn pick_cvss(metrics: &Metrics) -> Option<(Option<f64>, Option<String>)> {
    for list in [
        &metrics.cvss_metric_v31,
        &metrics.cvss_metric_v40,
        &metrics.cvss_metric_v30,
        &metrics.cvss_metric_v2,
    ] {
        if list.is_empty() {
            continue;
        }
        let chosen = list
            .iter()
            .find(|m| m.metric_type.as_deref() == Some("Primary"))
            .unwrap_or(&list[0]);
        let score = chosen.cvss_data.as_ref().and_then(|d| d.base_score);
        let severity = chosen
            .cvss_data
            .as_ref()
            .and_then(|d| d.base_severity.clone())
            .or_else(|| chosen.base_severity.clone());
        return Some((score, severity));
    }
    None
}

/// NVD timestamps come as RFC 3339 or as naive `2013-01-10T12:37:11.190`.
fn parse_nvd_time(raw: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}
