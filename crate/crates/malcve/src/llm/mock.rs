//! Scripted mock backend for deterministic, offline tests.
//!
//! A script is a JSON file of rules. Each incoming request is matched against
//! the rules in order; the first rule whose `step` matches and whose
//! `when_contains` substring (if any) occurs in the prompt supplies the
//! response. A rule's responses are consumed sequentially across calls and
//! the last one repeats, which makes reprompt-then-succeed scenarios easy to
//! script. Responses written as JSON objects are serialized to text, so
//! structured outputs can be kept readable in the script file.

use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;
use serde_json::Value;

use crate::llm::backend::{ChatRequest, LlmBackend, LlmError, PromptStep};

#[derive(Debug, Deserialize)]
struct Script {
    rules: Vec<RawRule>,
}

#[derive(Debug, Deserialize)]
struct RawRule {
    step: PromptStep,
    #[serde(default)]
    when_contains: Option<String>,
    responses: Vec<Value>,
}

struct Rule {
    step: PromptStep,
    when_contains: Option<String>,
    responses: Vec<String>,
    cursor: Mutex<usize>,
}

/// One request the mock has served, kept for assertions about call counts
/// and reprompt contents.
#[derive(Debug, Clone)]
pub struct MockCall {
    pub step: PromptStep,
    pub prompt: String,
}

pub struct MockBackend {
    rules: Vec<Rule>,
    calls: Mutex<Vec<MockCall>>,
}

impl MockBackend {
    pub fn from_script_str(script: &str) -> Result<Self, LlmError> {
        let script: Script =
            serde_json::from_str(script).map_err(|e| LlmError::BadScript(e.to_string()))?;
        let mut rules = Vec::new();
        for (i, raw) in script.rules.into_iter().enumerate() {
            if raw.responses.is_empty() {
                return Err(LlmError::BadScript(format!("rule {i} has no responses")));
            }
            let responses = raw
                .responses
                .into_iter()
                .map(|v| match v {
                    Value::String(s) => s,
                    other => other.to_string(),
                })
                .collect();
            rules.push(Rule {
                step: raw.step,
                when_contains: raw.when_contains,
                responses,
                cursor: Mutex::new(0),
            });
        }
        Ok(Self {
            rules,
            calls: Mutex::new(Vec::new()),
        })
    }

    pub fn from_script_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|source| LlmError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_script_str(&text)
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn calls_for(&self, step: PromptStep) -> usize {
        self.calls
            .lock()
            .unwrap()
            .iter()
            .filter(|c| c.step == step)
            .count()
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.calls.lock().unwrap().push(MockCall {
            step: request.step,
            prompt: request.prompt.clone(),
        });
        for rule in &self.rules {
            if rule.step != request.step {
                continue;
            }
            if let Some(needle) = &rule.when_contains {
                if !request.prompt.contains(needle.as_str()) {
                    continue;
                }
            }
            let mut cursor = rule.cursor.lock().unwrap();
            let response = rule.responses[(*cursor).min(rule.responses.len() - 1)].clone();
            *cursor += 1;
            return Ok(response);
        }
        Err(LlmError::NoMockRule { step: request.step })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(step: PromptStep, prompt: &str) -> ChatRequest {
        ChatRequest {
            step,
            model: "mock".to_string(),
            prompt: prompt.to_string(),
        }
    }

    #[test]
    fn first_matching_rule_wins() {
        let backend = MockBackend::from_script_str(
            r#"{"rules": [
                {"step": "summarize", "when_contains": "Alpha", "responses": ["from alpha"]},
                {"step": "summarize", "responses": ["generic"]}
            ]}"#,
        )
        .unwrap();
        assert_eq!(
            backend
                .complete(&request(PromptStep::Summarize, "class Alpha {}"))
                .unwrap(),
            "from alpha"
        );
        assert_eq!(
            backend
                .complete(&request(PromptStep::Summarize, "class Beta {}"))
                .unwrap(),
            "generic"
        );
    }

    #[test]
    fn responses_consume_sequentially_and_last_repeats() {
        let backend = MockBackend::from_script_str(
            r#"{"rules": [{"step": "queries", "responses": ["one", "two"]}]}"#,
        )
        .unwrap();
        let req = request(PromptStep::Queries, "p");
        assert_eq!(backend.complete(&req).unwrap(), "one");
        assert_eq!(backend.complete(&req).unwrap(), "two");
        assert_eq!(backend.complete(&req).unwrap(), "two");
        assert_eq!(backend.calls_for(PromptStep::Queries), 3);
    }

    #[test]
    fn json_object_responses_serialize_to_text() {
        let backend = MockBackend::from_script_str(
            r#"{"rules": [{"step": "predict", "responses": [{"matched_cve": "NONE"}]}]}"#,
        )
        .unwrap();
        let text = backend
            .complete(&request(PromptStep::Predict, "p"))
            .unwrap();
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["matched_cve"], "NONE");
    }

    #[test]
    fn unmatched_step_is_an_error() {
        let backend = MockBackend::from_script_str(
            r#"{"rules": [{"step": "summarize", "responses": ["r"]}]}"#,
        )
        .unwrap();
        assert!(matches!(
            backend
                .complete(&request(PromptStep::Predict, "p"))
                .unwrap_err(),
            LlmError::NoMockRule {
                step: PromptStep::Predict
            }
        ));
    }

    #[test]
    fn empty_responses_rejected_at_load() {
        match MockBackend::from_script_str(r#"{"rules": [{"step": "summarize", "responses": []}]}"#)
        {
            Err(LlmError::BadScript(_)) => {}
            Err(other) => panic!("expected BadScript, got {other:?}"),
            Ok(_) => panic!("expected BadScript, got a backend"),
        }
    }
}
