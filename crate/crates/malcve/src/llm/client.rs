//! High-level gateway for the three model calls.
//!
//! `LlmClient` renders prompts, meters tokens against the rate budget,
//! records usage in the cost ledger, and validates structured responses.
//! Invalid output earns exactly one repair reprompt carrying the validation
//! error; a second failure surfaces as a schema error with the raw response
//! preserved. Every raw response is kept in a transcript so reports can
//! persist model output verbatim.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::cve_kb::sha256_hex;
use crate::llm::backend::{ChatRequest, LlmBackend, LlmError, PromptStep};
use crate::llm::cost::{CharsPer4, CostLedger, TokenEstimator};
use crate::llm::prompts::{files_block, PromptSet};
use crate::llm::rate::{InFlightLimiter, TokenRateLimiter};
use crate::llm::types::{CodeSummary, CvePrediction, SourceUnit, NO_MATCH};
use crate::rerank::RankedCve;

/// Maximum number of search queries kept after dedup.
pub const MAX_QUERIES: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LlmClientConfig {
    pub summarize_model: String,
    pub queries_model: String,
    pub predict_model: String,
    pub context_limit_tokens: u64,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            summarize_model: "gpt-4o-mini".to_string(),
            queries_model: "gpt-4o-mini".to_string(),
            predict_model: "gpt-4o-mini".to_string(),
            context_limit_tokens: 128_000,
        }
    }
}

/// One model round trip: the response verbatim, the prompt by hash.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Exchange {
    pub step: PromptStep,
    pub model: String,
    pub prompt_sha256: String,
    pub response: String,
}

pub struct LlmClient {
    backend: Arc<dyn LlmBackend>,
    prompts: PromptSet,
    config: LlmClientConfig,
    estimator: Arc<dyn TokenEstimator>,
    ledger: Arc<CostLedger>,
    rate: Option<Arc<TokenRateLimiter>>,
    in_flight: Option<Arc<InFlightLimiter>>,
    transcript: Mutex<Vec<Exchange>>,
}

impl LlmClient {
    pub fn new(
        backend: Arc<dyn LlmBackend>,
        prompts: PromptSet,
        config: LlmClientConfig,
        ledger: Arc<CostLedger>,
    ) -> Self {
        Self {
            backend,
            prompts,
            config,
            estimator: Arc::new(CharsPer4),
            ledger,
            rate: None,
            in_flight: None,
            transcript: Mutex::new(Vec::new()),
        }
    }

    pub fn with_rate_limiter(mut self, rate: Arc<TokenRateLimiter>) -> Self {
        self.rate = Some(rate);
        self
    }

    pub fn with_in_flight(mut self, limiter: Arc<InFlightLimiter>) -> Self {
        self.in_flight = Some(limiter);
        self
    }

    pub fn with_estimator(mut self, estimator: Arc<dyn TokenEstimator>) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    /// Drains the recorded exchanges, oldest first.
    pub fn take_transcript(&self) -> Vec<Exchange> {
        std::mem::take(&mut self.transcript.lock().unwrap())
    }

    fn model_for(&self, step: PromptStep) -> &str {
        match step {
            PromptStep::Summarize => &self.config.summarize_model,
            PromptStep::Queries => &self.config.queries_model,
            PromptStep::Predict => &self.config.predict_model,
        }
    }

    fn send(&self, step: PromptStep, prompt: &str) -> Result<String, LlmError> {
        let prompt_tokens = self.estimator.estimate(prompt);
        if prompt_tokens > self.config.context_limit_tokens {
            return Err(LlmError::ContextTooLarge {
                prompt_tokens,
                limit: self.config.context_limit_tokens,
            });
        }
        if let Some(rate) = &self.rate {
            rate.acquire(prompt_tokens)?;
        }
        let _guard = self.in_flight.as_ref().map(|limiter| limiter.enter());
        let model = self.model_for(step).to_string();
        let response = self.backend.complete(&ChatRequest {
            step,
            model: model.clone(),
            prompt: prompt.to_string(),
        })?;
        let output_tokens = self.estimator.estimate(&response);
        self.ledger
            .record_chat(&model, prompt_tokens, output_tokens);
        self.transcript.lock().unwrap().push(Exchange {
            step,
            model,
            prompt_sha256: sha256_hex(prompt.as_bytes()),
            response: response.clone(),
        });
        Ok(response)
    }

    /// Summarizes decompiled sources into the structured verdict schema.
    pub fn summarize_code(&self, sources: &[SourceUnit]) -> Result<CodeSummary, LlmError> {
        let prompt = self.prompts.render_summarize(sources);
        let raw = self.send(PromptStep::Summarize, &prompt)?;
        match parse_summary(&raw) {
            Ok(summary) => Ok(summary),
            Err(message) => {
                let raw = self.send(PromptStep::Summarize, &repair_prompt(&prompt, &message))?;
                parse_summary(&raw).map_err(|message| LlmError::Schema { message, raw })
            }
        }
    }

    /// Turns a summary into 1..=10 deduplicated plain-text search queries.
    /// An empty response earns one retry, then the summary's own keywords
    /// are used as the fallback.
    pub fn generate_queries(&self, summary: &CodeSummary) -> Result<Vec<String>, LlmError> {
        let summary_json =
            serde_json::to_string_pretty(summary).expect("summary serializes to JSON");
        let prompt = self.prompts.render_queries(&summary_json);
        let raw = self.send(PromptStep::Queries, &prompt)?;
        let queries = parse_queries(&raw);
        if !queries.is_empty() {
            return Ok(queries);
        }
        let nudge = repair_prompt(&prompt, "the response contained no queries");
        let raw = self.send(PromptStep::Queries, &nudge)?;
        let queries = parse_queries(&raw);
        if !queries.is_empty() {
            return Ok(queries);
        }
        let fallback = dedup_cap(summary.cve_search_queries.keywords.iter().map(|k| k.trim()));
        if fallback.is_empty() {
            return Err(LlmError::Schema {
                message: "no queries returned and the summary has no fallback keywords".to_string(),
                raw,
            });
        }
        Ok(fallback)
    }

    /// Asks the model to pick the candidate CVE matching the summarized
    /// behavior. The answer must be a listed candidate id or "NONE".
    pub fn predict_cve(
        &self,
        summary: &CodeSummary,
        candidates: &[RankedCve],
        sources: &[SourceUnit],
    ) -> Result<CvePrediction, LlmError> {
        if candidates.is_empty() || candidates.len() > 10 {
            return Err(LlmError::CandidateCount(candidates.len()));
        }
        let summary_json =
            serde_json::to_string_pretty(summary).expect("summary serializes to JSON");
        let cves = candidates
            .iter()
            .map(|c| format!("- {}: {}", c.cve_id, c.description))
            .collect::<Vec<_>>()
            .join("\n");
        let code = files_block(sources);
        let prompt = self.prompts.render_predict(&summary_json, &cves, &code);
        let raw = self.send(PromptStep::Predict, &prompt)?;
        match parse_prediction(&raw, candidates) {
            Ok(prediction) => Ok(prediction),
            Err(message) => {
                let raw = self.send(PromptStep::Predict, &repair_prompt(&prompt, &message))?;
                parse_prediction(&raw, candidates)
                    .map_err(|message| LlmError::Schema { message, raw })
            }
        }
    }
}

fn repair_prompt(prompt: &str, error: &str) -> String {
    format!(
        "{prompt}\n\nYour previous response was rejected: {error}. \
         Respond again, following the required output format exactly."
    )
}

/// Strips a Markdown code fence if the whole response is wrapped in one.
fn extract_json(text: &str) -> &str {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("```") {
        let body = rest.split_once('\n').map(|(_, r)| r).unwrap_or("");
        let body = body.rsplit_once("```").map(|(b, _)| b).unwrap_or(body);
        return body.trim();
    }
    trimmed
}

fn parse_summary(raw: &str) -> Result<CodeSummary, String> {
    let summary: CodeSummary =
        serde_json::from_str(extract_json(raw)).map_err(|e| e.to_string())?;
    summary.validate()?;
    Ok(summary)
}

fn parse_prediction(raw: &str, candidates: &[RankedCve]) -> Result<CvePrediction, String> {
    let prediction: CvePrediction =
        serde_json::from_str(extract_json(raw)).map_err(|e| e.to_string())?;
    if prediction.matched_cve != NO_MATCH
        && !candidates
            .iter()
            .any(|c| c.cve_id == prediction.matched_cve)
    {
        return Err(format!(
            "matched_cve {:?} is not one of the candidate ids: {}",
            prediction.matched_cve,
            candidates
                .iter()
                .map(|c| c.cve_id.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    Ok(prediction)
}

/// Splits a plain-text response into queries: numbering and bullets are
/// stripped, blanks and fences dropped, duplicates removed
/// case-insensitively, and the list capped at `MAX_QUERIES`.
fn parse_queries(text: &str) -> Vec<String> {
    dedup_cap(
        text.lines()
            .map(strip_listing)
            .filter(|line| !line.is_empty() && !line.starts_with("```")),
    )
}

fn dedup_cap<'a>(lines: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if seen.insert(line.to_lowercase()) {
            out.push(line.to_string());
            if out.len() == MAX_QUERIES {
                break;
            }
        }
    }
    out
}

fn strip_listing(line: &str) -> &str {
    let s = line.trim().trim_start_matches(['-', '*', '•']).trim_start();
    let digits_end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    if digits_end > 0 {
        let rest = &s[digits_end..];
        for mark in ['.', ')', ':'] {
            if let Some(stripped) = rest.strip_prefix(mark) {
                return stripped.trim_start();
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{Clock, VirtualClock};
    use crate::llm::cost::PriceTable;
    use crate::llm::mock::MockBackend;
    use crate::rerank::RankSource;
    use std::time::Duration;

    fn valid_summary_response() -> &'static str {
        r#"{"step": "summarize", "responses": [{
            "verdict": {"label": "Malicious", "confidence": 0.9, "rationale": "downloads and runs a payload"},
            "summary": "Bypasses the security manager via sun.awt.SunToolkit.getField and runs a payload.",
            "activities": ["Disabling the security manager"],
            "indicators_of_compromise": {"urls": [], "created_files": [], "registry_entries": [], "mutex": [], "network_activity": []},
            "libraries_used": ["sun.awt.SunToolkit"],
            "cve_search_queries": {"status": "success", "message": "ok", "keywords": ["sun.awt.SunToolkit getField reflection"]}
        }]}"#
    }

    fn client_with(script: &str) -> (LlmClient, Arc<MockBackend>) {
        let backend = Arc::new(MockBackend::from_script_str(script).unwrap());
        let ledger = Arc::new(CostLedger::new(PriceTable::default()));
        let client = LlmClient::new(
            backend.clone(),
            PromptSet::builtin(),
            LlmClientConfig::default(),
            ledger,
        );
        (client, backend)
    }

    fn sources() -> Vec<SourceUnit> {
        vec![SourceUnit::new("Gondzz.java", "class Gondzz {}")]
    }

    fn candidate(id: &str) -> RankedCve {
        RankedCve {
            cve_id: id.to_string(),
            similarity: 0.9,
            bm25: 1.0,
            norm_similarity: 1.0,
            norm_bm25: 1.0,
            final_score: 1.0,
            source: RankSource::Retrieval,
            contributing_queries: vec![],
            cwe_ids: vec![],
            description: format!("description of {id}"),
        }
    }

    #[test]
    fn summarize_parses_valid_response() {
        let script = format!(r#"{{"rules": [{}]}}"#, valid_summary_response());
        let (client, backend) = client_with(&script);
        let summary = client.summarize_code(&sources()).unwrap();
        assert_eq!(summary.verdict.confidence, Some(0.9));
        assert!(!summary.is_benign());
        assert_eq!(backend.call_count(), 1);

        let transcript = client.take_transcript();
        assert_eq!(transcript.len(), 1);
        assert!(transcript[0].response.contains("SunToolkit"));
        assert!(client.take_transcript().is_empty());
    }

    #[test]
    fn invalid_then_valid_summary_takes_one_reprompt() {
        let script = format!(
            r#"{{"rules": [{{"step": "summarize", "responses": ["{{}}", {}]}}]}}"#,
            r#"{"verdict": "Benign", "summary": "prints a greeting"}"#
        );
        let (client, backend) = client_with(&script);
        let summary = client.summarize_code(&sources()).unwrap();
        assert!(summary.is_benign());
        assert_eq!(backend.calls_for(PromptStep::Summarize), 2);
        let calls = backend.calls();
        assert!(calls[1].prompt.contains("previous response was rejected"));
    }

    #[test]
    fn twice_invalid_summary_is_a_schema_error_with_raw_preserved() {
        let script = r#"{"rules": [{"step": "summarize", "responses": [{"verdict": "Evil"}]}]}"#;
        let (client, backend) = client_with(script);
        let err = client.summarize_code(&sources()).unwrap_err();
        match err {
            LlmError::Schema { raw, .. } => assert!(raw.contains("Evil")),
            other => panic!("expected schema error, got {other:?}"),
        }
        assert_eq!(backend.call_count(), 2);
    }

    #[test]
    fn fenced_json_is_accepted() {
        let fenced = "```json\n{\"verdict\": \"Benign\", \"summary\": \"s\"}\n```";
        let script = serde_json::json!({
            "rules": [{"step": "summarize", "responses": [fenced]}]
        })
        .to_string();
        let (client, _) = client_with(&script);
        assert!(client.summarize_code(&sources()).unwrap().is_benign());
    }

    #[test]
    fn oversized_prompt_never_reaches_the_backend() {
        let script = r#"{"rules": [{"step": "summarize", "responses": ["x"]}]}"#;
        let (client, backend) = client_with(script);
        let client = LlmClient {
            config: LlmClientConfig {
                context_limit_tokens: 10,
                ..LlmClientConfig::default()
            },
            ..client
        };
        let err = client.summarize_code(&sources()).unwrap_err();
        assert!(matches!(err, LlmError::ContextTooLarge { limit: 10, .. }));
        assert_eq!(backend.call_count(), 0);
    }

    fn benign_summary() -> CodeSummary {
        serde_json::from_str(r#"{"verdict": "Benign", "summary": "s"}"#).unwrap()
    }

    fn malicious_summary() -> CodeSummary {
        serde_json::from_str(
            r#"{"verdict": "Malicious", "summary": "s",
                "cve_search_queries": {"keywords": ["fallback one", "fallback two"]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn queries_strip_numbering_and_dedup_case_insensitively() {
        let response = "1. sun.awt.SunToolkit getField reflection\n2) ClassFinder.findClass restricted package\n- MBeanInstantiator findClass\n\nmbeaninstantiator findclass\nJMX remote code execution";
        let script = serde_json::json!({
            "rules": [{"step": "queries", "responses": [response]}]
        })
        .to_string();
        let (client, _) = client_with(&script);
        let queries = client.generate_queries(&malicious_summary()).unwrap();
        assert_eq!(
            queries,
            vec![
                "sun.awt.SunToolkit getField reflection",
                "ClassFinder.findClass restricted package",
                "MBeanInstantiator findClass",
                "JMX remote code execution",
            ]
        );
    }

    #[test]
    fn queries_cap_at_ten() {
        let lines: Vec<String> = (1..=14).map(|i| format!("query number {i}")).collect();
        let script = serde_json::json!({
            "rules": [{"step": "queries", "responses": [lines.join("\n")]}]
        })
        .to_string();
        let (client, _) = client_with(&script);
        let queries = client.generate_queries(&malicious_summary()).unwrap();
        assert_eq!(queries.len(), MAX_QUERIES);
        assert_eq!(queries[0], "query number 1");
    }

    #[test]
    fn empty_query_responses_fall_back_to_summary_keywords() {
        let script = r#"{"rules": [{"step": "queries", "responses": ["", "\n\n"]}]}"#;
        let (client, backend) = client_with(script);
        let queries = client.generate_queries(&malicious_summary()).unwrap();
        assert_eq!(queries, vec!["fallback one", "fallback two"]);
        assert_eq!(backend.calls_for(PromptStep::Queries), 2);
    }

    #[test]
    fn empty_queries_without_fallback_is_a_schema_error() {
        let script = r#"{"rules": [{"step": "queries", "responses": [""]}]}"#;
        let (client, _) = client_with(script);
        let err = client.generate_queries(&benign_summary()).unwrap_err();
        assert!(matches!(err, LlmError::Schema { .. }));
    }

    #[test]
    fn predict_accepts_a_listed_candidate() {
        let script = serde_json::json!({
            "rules": [{"step": "predict", "responses": [{
                "behavior_explanation": "bypasses the security manager",
                "matched_cve": "CVE-2012-4681",
                "justification": "reflection chain matches"
            }]}]
        })
        .to_string();
        let (client, _) = client_with(&script);
        let prediction = client
            .predict_cve(
                &malicious_summary(),
                &[candidate("CVE-2012-4681")],
                &sources(),
            )
            .unwrap();
        assert_eq!(prediction.matched_cve, "CVE-2012-4681");
    }

    #[test]
    fn unlisted_candidate_earns_one_reprompt() {
        let script = serde_json::json!({
            "rules": [{"step": "predict", "responses": [
                {"matched_cve": "CVE-1999-0001"},
                {"matched_cve": "CVE-2013-0422"}
            ]}]
        })
        .to_string();
        let (client, backend) = client_with(&script);
        let prediction = client
            .predict_cve(
                &malicious_summary(),
                &[candidate("CVE-2013-0422")],
                &sources(),
            )
            .unwrap();
        assert_eq!(prediction.matched_cve, "CVE-2013-0422");
        assert_eq!(backend.calls_for(PromptStep::Predict), 2);
        assert!(backend.calls()[1].prompt.contains("CVE-1999-0001"));
    }

    #[test]
    fn repeated_membership_violation_is_a_schema_error() {
        let script = serde_json::json!({
            "rules": [{"step": "predict", "responses": [{"matched_cve": "CVE-1999-0001"}]}]
        })
        .to_string();
        let (client, _) = client_with(&script);
        let err = client
            .predict_cve(
                &malicious_summary(),
                &[candidate("CVE-2013-0422")],
                &sources(),
            )
            .unwrap_err();
        assert!(matches!(err, LlmError::Schema { .. }));
    }

    #[test]
    fn none_answer_is_accepted() {
        let script = serde_json::json!({
            "rules": [{"step": "predict", "responses": [{"matched_cve": "NONE"}]}]
        })
        .to_string();
        let (client, _) = client_with(&script);
        let prediction = client
            .predict_cve(
                &malicious_summary(),
                &[candidate("CVE-2013-0422")],
                &sources(),
            )
            .unwrap();
        assert!(prediction.is_no_match());
    }

    #[test]
    fn candidate_count_is_bounded() {
        let script = r#"{"rules": []}"#;
        let (client, _) = client_with(script);
        let err = client
            .predict_cve(&malicious_summary(), &[], &sources())
            .unwrap_err();
        assert!(matches!(err, LlmError::CandidateCount(0)));

        let eleven: Vec<RankedCve> = (0..11)
            .map(|i| candidate(&format!("CVE-2020-{i:04}")))
            .collect();
        let err = client
            .predict_cve(&malicious_summary(), &eleven, &sources())
            .unwrap_err();
        assert!(matches!(err, LlmError::CandidateCount(11)));
    }

    struct FixedTokens(u64);
    impl TokenEstimator for FixedTokens {
        fn estimate(&self, _text: &str) -> u64 {
            self.0
        }
    }

    #[test]
    fn rate_limited_sends_wait_out_the_window() {
        let script = r#"{"rules": [{"step": "summarize", "responses": ["{\"verdict\": \"Benign\", \"summary\": \"s\"}"]}]}"#;
        let backend = Arc::new(MockBackend::from_script_str(script).unwrap());
        let ledger = Arc::new(CostLedger::new(PriceTable::default()));
        let clock = Arc::new(VirtualClock::at_epoch());
        let rate = Arc::new(TokenRateLimiter::new(100, clock.clone()));
        let client = LlmClient::new(
            backend,
            PromptSet::builtin(),
            LlmClientConfig::default(),
            ledger.clone(),
        )
        .with_rate_limiter(rate)
        .with_estimator(Arc::new(FixedTokens(60)));

        client.summarize_code(&sources()).unwrap();
        assert_eq!(clock.monotonic(), Duration::ZERO);
        client.summarize_code(&sources()).unwrap();
        // The second 60-token grant does not fit alongside the first within
        // one minute, so the limiter waited for the window to roll over.
        assert!(clock.monotonic() >= Duration::from_secs(60));

        let usage = &ledger.snapshot().per_model["gpt-4o-mini"];
        assert_eq!(usage.input_tokens, 120);
        assert_eq!(usage.output_tokens, 120);
    }
}
