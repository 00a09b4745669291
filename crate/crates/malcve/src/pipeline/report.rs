//! Per-file analysis report: the one JSON artifact each input produces.
//!
//! Reports serialize with a fixed field order so reruns with injected clocks
//! and mock backends are byte-identical. Paths that vary per run (temp
//! decompilation dirs) are deliberately excluded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::decompile::{DecompileResult, DecompileStatus};
use crate::deobfuscator::FileOutcome;
use crate::llm::client::{Exchange, LlmClientConfig};
use crate::llm::cost::CostSnapshot;
use crate::llm::prompts::PromptHashes;
use crate::llm::types::{CodeSummary, CvePrediction};
use crate::rerank::RankedCve;

/// BM25 corpus statistics are computed over the retrieved candidate pool,
/// not the whole knowledge base; reports record this choice.
pub const BM25_CORPUS_SCOPE: &str = "candidate-pool";

pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Terminal state of one analyzed input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportState {
    Done,
    Failed,
    Excluded,
}

/// Where a failed analysis stopped.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FailureNote {
    pub stage: String,
    pub message: String,
}

/// Decompilation outcome without the run-specific source directory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DecompileSummary {
    pub status: DecompileStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_used: Option<String>,
    pub diagnostics: String,
}

impl From<&DecompileResult> for DecompileSummary {
    fn from(result: &DecompileResult) -> Self {
        Self {
            status: result.status,
            tool_used: result.tool_used.clone(),
            diagnostics: result.diagnostics.clone(),
        }
    }
}

/// Aggregated string-folding outcome across a source tree.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct FoldSummary {
    pub files_processed: usize,
    pub files_changed: usize,
    pub total_folds: usize,
    pub diagnostics: Vec<String>,
}

impl FoldSummary {
    pub fn from_outcomes(outcomes: &[FileOutcome], root: &Path) -> Self {
        let mut summary = Self {
            files_processed: outcomes.len(),
            ..Self::default()
        };
        for outcome in outcomes {
            if outcome.changed {
                summary.files_changed += 1;
            }
            summary.total_folds += outcome.folds;
            let label = outcome
                .path
                .strip_prefix(root)
                .unwrap_or(&outcome.path)
                .to_string_lossy()
                .into_owned();
            for diagnostic in &outcome.diagnostics {
                summary.diagnostics.push(format!("{label}: {diagnostic}"));
            }
        }
        summary
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportMetadata {
    pub pipeline_version: String,
    pub embedding_model: String,
    pub llm: LlmClientConfig,
    pub prompt_hashes: PromptHashes,
    /// Snapshot of the effective configuration the run used.
    pub config: Value,
    pub bm25_corpus_scope: String,
    pub started_at: String,
    pub finished_at: String,
    /// Token usage and exact cost for this file only.
    pub usage: CostSnapshot,
    /// Raw model responses, verbatim, in call order.
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AnalysisReport {
    pub file_sha256: String,
    pub input_name: String,
    pub state: ReportState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureNote>,
    pub decompile: DecompileSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deobfuscation: Option<FoldSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code_summary: Option<CodeSummary>,
    pub search_queries: Vec<String>,
    pub candidates: Vec<RankedCve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<CvePrediction>,
    pub metadata: ReportMetadata,
}

impl AnalysisReport {
    /// `out/<sha256>.report.json`
    pub fn path_for(out_dir: &Path, sha256: &str) -> PathBuf {
        out_dir.join(format!("{sha256}.report.json"))
    }

    /// Writes the report atomically (temp file + rename) as pretty JSON.
    pub fn persist(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(out_dir)?;
        let path = Self::path_for(out_dir, &self.file_sha256);
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        let tmp = out_dir.join(format!(".{}.report.json.tmp", self.file_sha256));
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::cost::CostSnapshot;
    use tempfile::TempDir;

    fn minimal_report() -> AnalysisReport {
        AnalysisReport {
            file_sha256: "ab".repeat(32),
            input_name: "sample.jar".to_string(),
            state: ReportState::Excluded,
            failure: None,
            decompile: DecompileSummary {
                status: DecompileStatus::Excluded,
                tool_used: None,
                diagnostics: "cfr: exited with exit status: 1".to_string(),
            },
            deobfuscation: None,
            code_summary: None,
            search_queries: vec![],
            candidates: vec![],
            prediction: None,
            metadata: ReportMetadata {
                pipeline_version: PIPELINE_VERSION.to_string(),
                embedding_model: "local-hash-v1".to_string(),
                llm: LlmClientConfig::default(),
                prompt_hashes: crate::llm::prompts::PromptSet::builtin().hashes(),
                config: serde_json::json!({}),
                bm25_corpus_scope: BM25_CORPUS_SCOPE.to_string(),
                started_at: "2026-01-01T00:00:00.000Z".to_string(),
                finished_at: "2026-01-01T00:00:00.000Z".to_string(),
                usage: CostSnapshot::default(),
                exchanges: vec![],
            },
        }
    }

    #[test]
    fn persist_and_load_round_trip() {
        let tmp = TempDir::new().unwrap();
        let report = minimal_report();
        let path = report.persist(tmp.path()).unwrap();
        assert_eq!(
            path.file_name().unwrap().to_str().unwrap(),
            format!("{}.report.json", "ab".repeat(32))
        );
        let loaded = AnalysisReport::load(&path).unwrap();
        assert_eq!(loaded, report);
    }

    #[test]
    fn repeated_persist_is_byte_identical() {
        let tmp = TempDir::new().unwrap();
        let report = minimal_report();
        let path = report.persist(tmp.path()).unwrap();
        let first = fs::read(&path).unwrap();
        report.persist(tmp.path()).unwrap();
        let second = fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn field_order_is_stable() {
        let text = serde_json::to_string_pretty(&minimal_report()).unwrap();
        let sha_pos = text.find("\"file_sha256\"").unwrap();
        let state_pos = text.find("\"state\"").unwrap();
        let meta_pos = text.find("\"metadata\"").unwrap();
        assert!(sha_pos < state_pos && state_pos < meta_pos);
    }

    #[test]
    fn fold_summary_aggregates_outcomes() {
        let outcomes = vec![
            FileOutcome {
                path: PathBuf::from("/work/a/Main.java"),
                folds: 2,
                changed: true,
                diagnostics: vec![],
                diff: None,
            },
            FileOutcome {
                path: PathBuf::from("/work/a/Other.java"),
                folds: 0,
                changed: false,
                diagnostics: vec!["lex error at byte 3".to_string()],
                diff: None,
            },
        ];
        let summary = FoldSummary::from_outcomes(&outcomes, Path::new("/work/a"));
        assert_eq!(summary.files_processed, 2);
        assert_eq!(summary.files_changed, 1);
        assert_eq!(summary.total_folds, 2);
        assert_eq!(summary.diagnostics, vec!["Other.java: lex error at byte 3"]);
    }
}
