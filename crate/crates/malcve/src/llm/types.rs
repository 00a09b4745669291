//! Structured output schemas for summarization and CVE prediction.
//!
//! `CodeSummary` mirrors the JSON the summarization prompt asks for. Model
//! output varies in shape, so deserialization is lenient where the schema
//! allows it: a verdict may be a bare label string or a full object, the
//! indicator lists default to empty, and `threat_mapping` is optional.
//! `validate` then enforces the semantic rules that serde cannot express.

use serde::{Deserialize, Deserializer, Serialize};

/// One decompiled source file handed to a prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceUnit {
    pub name: String,
    pub content: String,
}

impl SourceUnit {
    pub fn new(name: &str, content: &str) -> Self {
        Self {
            name: name.to_string(),
            content: content.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictLabel {
    Benign,
    Suspicious,
    Malicious,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Verdict {
    pub label: VerdictLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub rationale: String,
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Full {
            label: VerdictLabel,
            #[serde(default)]
            confidence: Option<f64>,
            #[serde(default)]
            rationale: String,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Label(VerdictLabel),
            Full(Full),
        }
        Ok(match Repr::deserialize(deserializer)? {
            Repr::Label(label) => Verdict {
                label,
                confidence: None,
                rationale: String::new(),
            },
            Repr::Full(full) => Verdict {
                label: full.label,
                confidence: full.confidence,
                rationale: full.rationale,
            },
        })
    }
}

/// The five indicator lists; absent lists deserialize as empty.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct IndicatorsOfCompromise {
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default)]
    pub created_files: Vec<String>,
    #[serde(default)]
    pub registry_entries: Vec<String>,
    #[serde(default)]
    pub mutex: Vec<String>,
    #[serde(default)]
    pub network_activity: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct CveSearchQueries {
    #[serde(default)]
    pub status: String,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CodeSummary {
    pub verdict: Verdict,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub activities: Vec<String>,
    #[serde(default)]
    pub indicators_of_compromise: IndicatorsOfCompromise,
    #[serde(default)]
    pub libraries_used: Vec<String>,
    #[serde(default)]
    pub cve_search_queries: CveSearchQueries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threat_mapping: Option<Vec<String>>,
}

impl CodeSummary {
    /// Enforces the rules serde cannot: confidence stays in [0, 1] and a
    /// non-benign verdict must come with search keywords, since retrieval
    /// depends on them.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(confidence) = self.verdict.confidence {
            if !(0.0..=1.0).contains(&confidence) || !confidence.is_finite() {
                return Err(format!(
                    "verdict.confidence must be within [0, 1], got {confidence}"
                ));
            }
        }
        if self.verdict.label != VerdictLabel::Benign
            && self
                .cve_search_queries
                .keywords
                .iter()
                .all(|k| k.trim().is_empty())
        {
            return Err(
                "cve_search_queries.keywords must be non-empty for a non-benign verdict"
                    .to_string(),
            );
        }
        Ok(())
    }

    pub fn is_benign(&self) -> bool {
        self.verdict.label == VerdictLabel::Benign
    }
}

/// Sentinel for a prediction that matched no candidate.
pub const NO_MATCH: &str = "NONE";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvePrediction {
    #[serde(default)]
    pub behavior_explanation: String,
    pub matched_cve: String,
    #[serde(default)]
    pub justification: String,
}

impl CvePrediction {
    pub fn is_no_match(&self) -> bool {
        self.matched_cve == NO_MATCH
    }
}
