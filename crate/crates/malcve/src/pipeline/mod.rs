//! End-to-end per-file orchestration.
//!
//! `run_analysis` drives one input through the full flow: decompile with
//! fallback, fold obfuscated strings, summarize, short-circuit on a benign
//! verdict, generate queries, embed and search, aggregate per-CVE maxima,
//! fuse with BM25, expand by CWE, predict, and persist the report. Model or
//! retrieval failures still produce a report recording the failed stage; the
//! only hard errors are configuration and I/O problems.
//!
//! Cost accounting is two-level: each file gets a private ledger whose
//! snapshot lands in its report (keeping report content independent of batch
//! order), and the context's shared ledger accumulates batch totals.

pub mod batch;
pub mod download;
pub mod report;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::SecondsFormat;
use serde_json::Value;
use tempfile::TempDir;
use thiserror::Error;
use walkdir::WalkDir;

use crate::clock::Clock;
use crate::cve_kb::{sha256_hex, KnowledgeBase};
use crate::decompile::{decompile, DecompileError, DecompileStatus, DecompilerSpec};
use crate::deobfuscator::deobfuscate_dir;
use crate::embeddings::EmbeddingProvider;
use crate::llm::backend::LlmBackend;
use crate::llm::client::{LlmClient, LlmClientConfig};
use crate::llm::cost::{CharsPer4, CostLedger, PriceTable, TokenEstimator};
use crate::llm::prompts::PromptSet;
use crate::llm::rate::{InFlightLimiter, RequestRateLimiter, TokenRateLimiter};
use crate::llm::types::{CodeSummary, SourceUnit};
use crate::rerank::{expand_by_cwe, fuse, tokenize, Candidate, FusionConfig, RankedCve};
use crate::vector_index::{aggregate_max, VectorSearch};

pub use download::{FetchError, Fetcher, HttpFetcher};
pub use report::{
    AnalysisReport, DecompileSummary, FailureNote, FoldSummary, ReportMetadata, ReportState,
    BM25_CORPUS_SCOPE, PIPELINE_VERSION,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Decompile(#[from] DecompileError),
    #[error("{0}")]
    Internal(String),
}

/// Everything an analysis worker needs; shared read-only across workers.
pub struct PipelineContext {
    pub kb: Arc<KnowledgeBase>,
    pub index: Arc<dyn VectorSearch>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub backend: Arc<dyn LlmBackend>,
    pub prompts: PromptSet,
    pub llm_config: LlmClientConfig,
    pub decompilers: Vec<DecompilerSpec>,
    pub fusion: FusionConfig,
    pub prices: PriceTable,
    /// Batch-wide ledger; per-file ledgers merge into it after each run.
    pub ledger: Arc<CostLedger>,
    pub rate: Option<Arc<TokenRateLimiter>>,
    pub in_flight: Option<Arc<InFlightLimiter>>,
    /// Sample fetcher for hash manifest entries.
    pub fetcher: Option<Arc<dyn Fetcher>>,
    pub download_limiter: Option<Arc<RequestRateLimiter>>,
    pub clock: Arc<dyn Clock>,
    pub out_dir: PathBuf,
    /// Per-query hits fetched from the vector index before aggregation.
    pub retrieval_depth: usize,
    /// Extra tokens dropped from BM25 queries on top of the built-in
    /// stoplist; compared case-insensitively.
    pub extra_stop_tokens: Vec<String>,
    /// Effective configuration, embedded verbatim in every report.
    pub config_snapshot: Value,
}

impl PipelineContext {
    fn make_client(&self, ledger: Arc<CostLedger>) -> LlmClient {
        let mut client = LlmClient::new(
            self.backend.clone(),
            self.prompts.clone(),
            self.llm_config.clone(),
            ledger,
        );
        if let Some(rate) = &self.rate {
            client = client.with_rate_limiter(rate.clone());
        }
        if let Some(in_flight) = &self.in_flight {
            client = client.with_in_flight(in_flight.clone());
        }
        client
    }
}

fn timestamp(clock: &dyn Clock) -> String {
    clock.now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// In-progress report fields plus the hooks needed to finalize it.
struct RunState<'a> {
    ctx: &'a PipelineContext,
    client: LlmClient,
    file_ledger: Arc<CostLedger>,
    started_at: String,
    file_sha256: String,
    input_name: String,
    decompile: DecompileSummary,
    deobfuscation: Option<FoldSummary>,
    code_summary: Option<CodeSummary>,
    search_queries: Vec<String>,
    candidates: Vec<RankedCve>,
    prediction: Option<crate::llm::types::CvePrediction>,
}

impl RunState<'_> {
    fn finish(
        self,
        state: ReportState,
        failure: Option<FailureNote>,
    ) -> Result<AnalysisReport, PipelineError> {
        let exchanges = self.client.take_transcript();
        let usage = self.file_ledger.snapshot();
        for (model, counters) in &usage.per_model {
            if counters.input_tokens > 0 || counters.output_tokens > 0 {
                self.ctx
                    .ledger
                    .record_chat(model, counters.input_tokens, counters.output_tokens);
            }
            if counters.embedding_tokens > 0 {
                self.ctx
                    .ledger
                    .record_embedding(model, counters.embedding_tokens);
            }
        }
        let report = AnalysisReport {
            file_sha256: self.file_sha256,
            input_name: self.input_name,
            state,
            failure,
            decompile: self.decompile,
            deobfuscation: self.deobfuscation,
            code_summary: self.code_summary,
            search_queries: self.search_queries,
            candidates: self.candidates,
            prediction: self.prediction,
            metadata: ReportMetadata {
                pipeline_version: PIPELINE_VERSION.to_string(),
                embedding_model: self.ctx.embedder.model_id().to_string(),
                llm: self.ctx.llm_config.clone(),
                prompt_hashes: self.ctx.prompts.hashes(),
                config: self.ctx.config_snapshot.clone(),
                bm25_corpus_scope: BM25_CORPUS_SCOPE.to_string(),
                started_at: self.started_at,
                finished_at: timestamp(self.ctx.clock.as_ref()),
                usage,
                exchanges,
            },
        };
        report
            .persist(&self.ctx.out_dir)
            .map_err(io_err(&self.ctx.out_dir))?;
        Ok(report)
    }

    fn fail(self, stage: &str, message: String) -> Result<AnalysisReport, PipelineError> {
        self.finish(
            ReportState::Failed,
            Some(FailureNote {
                stage: stage.to_string(),
                message,
            }),
        )
    }
}

/// Analyzes one JAR end to end and persists its report.
pub fn run_analysis(
    jar_path: &Path,
    ctx: &PipelineContext,
) -> Result<AnalysisReport, PipelineError> {
    let bytes = fs::read(jar_path).map_err(io_err(jar_path))?;
    let file_ledger = Arc::new(CostLedger::new(ctx.prices.clone()));
    let mut state = RunState {
        ctx,
        client: ctx.make_client(file_ledger.clone()),
        file_ledger,
        started_at: timestamp(ctx.clock.as_ref()),
        file_sha256: sha256_hex(&bytes),
        input_name: jar_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| jar_path.display().to_string()),
        decompile: DecompileSummary {
            status: DecompileStatus::Excluded,
            tool_used: None,
            diagnostics: String::new(),
        },
        deobfuscation: None,
        code_summary: None,
        search_queries: Vec::new(),
        candidates: Vec::new(),
        prediction: None,
    };

    // Private workdir per call; dropped (deleted) when analysis ends.
    let workdir = TempDir::new().map_err(io_err(Path::new("tempdir")))?;
    let decompiled = decompile(jar_path, &ctx.decompilers, workdir.path())?;
    state.decompile = DecompileSummary::from(&decompiled);
    if decompiled.status != DecompileStatus::Ok {
        return state.finish(ReportState::Excluded, None);
    }
    let source_dir = decompiled
        .source_dir
        .as_deref()
        .expect("ok decompile carries a source dir");

    let outcomes = deobfuscate_dir(source_dir, true, false).map_err(io_err(source_dir))?;
    state.deobfuscation = Some(FoldSummary::from_outcomes(&outcomes, source_dir));
    let sources = load_sources(source_dir)?;

    let summary = match state.client.summarize_code(&sources) {
        Ok(summary) => summary,
        Err(err) => return state.fail("summarize", err.to_string()),
    };
    state.code_summary = Some(summary.clone());
    if summary.is_benign() {
        return state.finish(ReportState::Done, None);
    }

    let queries = match state.client.generate_queries(&summary) {
        Ok(queries) => queries,
        Err(err) => return state.fail("generate_queries", err.to_string()),
    };
    state.search_queries = queries.clone();

    let estimator = CharsPer4;
    let embed_tokens: u64 = queries.iter().map(|q| estimator.estimate(q)).sum();
    state
        .file_ledger
        .record_embedding(ctx.embedder.model_id(), embed_tokens);
    let vectors = match ctx.embedder.embed_batch(&queries) {
        Ok(vectors) => vectors,
        Err(err) => return state.fail("embed_queries", err.to_string()),
    };

    let per_query = match ctx.index.search_batch(&vectors, ctx.retrieval_depth) {
        Ok(hits) => hits,
        Err(err) => return state.fail("search", err.to_string()),
    };
    let aggregated = aggregate_max(&per_query);

    let mut candidates = Vec::with_capacity(aggregated.len());
    for hit in &aggregated {
        let record = ctx.kb.get(&hit.cve_id).ok_or_else(|| {
            PipelineError::Internal(format!("{} is in the index but not the kb", hit.cve_id))
        })?;
        candidates.push(Candidate {
            cve_id: hit.cve_id.clone(),
            similarity: hit.max_similarity,
            description: record.description.clone(),
            cwe_ids: record.cwe_ids.clone(),
            contributing_queries: hit.contributing_queries.clone(),
        });
    }

    let mut library_tokens = Vec::new();
    for library in &summary.libraries_used {
        library_tokens.extend(tokenize(library));
    }
    library_tokens.retain(|t| {
        !ctx.extra_stop_tokens
            .iter()
            .any(|stop| stop.eq_ignore_ascii_case(t))
    });
    let ranked = match fuse(&candidates, &library_tokens, &ctx.fusion) {
        Ok(ranked) => ranked,
        Err(err) => return state.fail("fuse", err.to_string()),
    };
    let expanded = expand_by_cwe(&ranked, &ctx.kb, &ctx.fusion);
    state.candidates = expanded.clone();

    if expanded.is_empty() {
        return state.finish(ReportState::Done, None);
    }
    let depth = ctx.fusion.output_top_n.clamp(1, 10);
    let shortlist: Vec<RankedCve> = expanded.iter().take(depth).cloned().collect();
    let prediction = match state.client.predict_cve(&summary, &shortlist, &sources) {
        Ok(prediction) => prediction,
        Err(err) => return state.fail("predict", err.to_string()),
    };
    state.prediction = Some(prediction);
    state.finish(ReportState::Done, None)
}

/// Reads every `.java` file under `root`, sorted by relative path.
fn load_sources(root: &Path) -> Result<Vec<SourceUnit>, PipelineError> {
    let mut paths: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"))
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    let mut sources = Vec::with_capacity(paths.len());
    for path in paths {
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let name = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .to_string_lossy()
            .into_owned();
        sources.push(SourceUnit {
            name,
            content: String::from_utf8_lossy(&bytes).into_owned(),
        });
    }
    Ok(sources)
}

#[cfg(test)]
pub(crate) mod testkit {
    //! Shared fixture builder: an in-memory pipeline over stub decompilers,
    //! the deterministic local embedder, and the scripted mock model.

    use super::*;
    use crate::clock::FixedClock;
    use crate::cve_kb::feed::FeedEntry;
    use crate::decompile::DecompilerRole;
    use crate::embeddings::LocalHashEmbedder;
    use crate::llm::mock::MockBackend;
    use crate::vector_index::{ExactIndex, RETRIEVAL_DEPTH};
    use std::os::unix::fs::PermissionsExt;

    pub const PLANTED_CVE: &str = "CVE-2012-4681";

    pub fn feed_entry(id: &str, description: &str, cwes: &[&str]) -> FeedEntry {
        FeedEntry {
            cve_id: id.to_string(),
            status: Some("Analyzed".to_string()),
            description: Some(description.to_string()),
            cwe_ids: cwes.iter().map(|c| c.to_string()).collect(),
            cvss_score: Some(9.3),
            cvss_severity: Some("CRITICAL".to_string()),
            published: None,
            last_modified: None,
        }
    }

    pub fn seed_entries() -> Vec<FeedEntry> {
        vec![
            feed_entry(
                PLANTED_CVE,
                "Unspecified vulnerability in the Java Runtime Environment allows remote \
                 attackers to bypass the SecurityManager via the com.sun.beans.finder.ClassFinder \
                 findClass method and sun.awt.SunToolkit getField reflection to access \
                 restricted classes.",
                &["CWE-264"],
            ),
            feed_entry(
                "CVE-2013-0422",
                "Java Runtime Environment allows remote code execution via the \
                 MBeanInstantiator findClass method and JMX classes with reflection.",
                &["CWE-264"],
            ),
            feed_entry(
                "CVE-2010-9001",
                "Buffer overflow in an image parsing library allows attackers to crash \
                 the decoder with a crafted bitmap.",
                &["CWE-120"],
            ),
            feed_entry(
                "CVE-2015-9002",
                "SQL injection in a login form lets attackers read database rows.",
                &["CWE-89"],
            ),
            feed_entry(
                "CVE-2018-9003",
                "Cross site scripting in a comment widget allows script injection.",
                &["CWE-79"],
            ),
        ]
    }

    /// Decompiled-source fixture planted by the stub decompiler.
    pub const MALICIOUS_SOURCE: &str = r#"public class Gondzz {
    public void run() {
        String cls = "sun.aw" + "t.SunTo" + "olkit";
        String method = new String(new char[]{'g', 'e', 't', 'F', 'i', 'e', 'l', 'd'});
        System.out.println(cls + "." + method);
    }
}
"#;

    pub const BENIGN_SOURCE: &str = r#"public class HelloPrinter {
    public static void main(String[] args) {
        System.out.println("hello world");
    }
}
"#;

    pub fn summarize_response_malicious() -> serde_json::Value {
        serde_json::json!({
            "verdict": {"label": "Malicious", "confidence": 0.95,
                        "rationale": "reflection chain disables the security manager"},
            "summary": "Uses sun.awt.SunToolkit.getField and ClassFinder.findClass to bypass the SecurityManager and run a payload.",
            "activities": ["Disabling the Java security manager", "Reflective access to restricted classes"],
            "indicators_of_compromise": {
                "urls": [], "created_files": [], "registry_entries": [], "mutex": [], "network_activity": []
            },
            "libraries_used": ["sun.awt.SunToolkit", "com.sun.beans.finder.ClassFinder"],
            "cve_search_queries": {
                "status": "success",
                "message": "generated",
                "keywords": ["sun.awt.SunToolkit getField reflection security bypass"]
            }
        })
    }

    pub fn default_script() -> String {
        serde_json::json!({
            "rules": [
                {
                    "step": "summarize",
                    "when_contains": "HelloPrinter",
                    "responses": [{
                        "verdict": {"label": "Benign", "confidence": 0.9, "rationale": "prints a constant"},
                        "summary": "Prints hello world.",
                        "activities": ["Console output"],
                        "libraries_used": ["java.lang.System"]
                    }]
                },
                {
                    "step": "summarize",
                    "when_contains": "Gondzz",
                    "responses": [summarize_response_malicious()]
                },
                {
                    "step": "queries",
                    "responses": ["sun.awt.SunToolkit getField reflection\ncom.sun.beans.finder.ClassFinder findClass restricted classes\nSecurityManager bypass remote code execution"]
                },
                {
                    "step": "predict",
                    "when_contains": PLANTED_CVE,
                    "responses": [{
                        "behavior_explanation": "The code bypasses SecurityManager restrictions via reflection.",
                        "matched_cve": PLANTED_CVE,
                        "justification": "The ClassFinder.findClass and SunToolkit.getField chain matches this CVE."
                    }]
                }
            ]
        })
        .to_string()
    }

    pub fn write_stub_decompiler(dir: &Path, name: &str, source: &str) -> PathBuf {
        let fixture = dir.join(format!("{name}.fixture.java"));
        fs::write(&fixture, source).unwrap();
        let script = dir.join(format!("{name}.sh"));
        fs::write(
            &script,
            format!(
                "#!/bin/sh\nmkdir -p \"$2\"\ncp {} \"$2/Main.java\"\nexit 0\n",
                fixture.display()
            ),
        )
        .unwrap();
        let mut perm = fs::metadata(&script).unwrap().permissions();
        perm.set_mode(0o755);
        fs::set_permissions(&script, perm).unwrap();
        script
    }

    pub fn write_failing_decompiler(dir: &Path, name: &str) -> PathBuf {
        let script = dir.join(format!("{name}.sh"));
        fs::write(&script, "#!/bin/sh\nexit 1\n").unwrap();
        let mut perm = fs::metadata(&script).unwrap().permissions();
        perm.set_mode(0o755);
        fs::set_permissions(&script, perm).unwrap();
        script
    }

    pub fn spec_for(script: &Path, role: DecompilerRole, name: &str) -> DecompilerSpec {
        DecompilerSpec::new(
            name,
            vec![
                script.to_string_lossy().into_owned(),
                "{jar}".to_string(),
                "{outdir}".to_string(),
            ],
            role,
        )
    }

    pub struct TestPipeline {
        pub tmp: tempfile::TempDir,
        pub ctx: PipelineContext,
        pub backend: Arc<MockBackend>,
    }

    impl TestPipeline {
        /// KB + exact index over the seed CVEs, one stub decompiler
        /// planting `source`, and the given mock script.
        pub fn new(script: &str, source: &str) -> Self {
            let tmp = tempfile::TempDir::new().unwrap();
            let clock = Arc::new(FixedClock::at_epoch());
            let embedder = Arc::new(LocalHashEmbedder::new(64));
            let kb_dir = tmp.path().join("kb");
            let mut kb =
                KnowledgeBase::create(&kb_dir, embedder.model_id(), 64, clock.as_ref()).unwrap();
            kb.ingest(&seed_entries(), embedder.as_ref()).unwrap();
            kb.persist().unwrap();
            let kb = Arc::new(kb);
            let index = Arc::new(ExactIndex::from_kb(&kb));

            let stub = write_stub_decompiler(tmp.path(), "stub", source);
            let backend = Arc::new(MockBackend::from_script_str(script).unwrap());
            let ctx = PipelineContext {
                kb,
                index,
                embedder,
                backend: backend.clone(),
                prompts: PromptSet::builtin(),
                llm_config: LlmClientConfig::default(),
                decompilers: vec![spec_for(&stub, DecompilerRole::Primary, "stub")],
                fusion: FusionConfig::default(),
                prices: PriceTable::default(),
                ledger: Arc::new(CostLedger::new(PriceTable::default())),
                rate: None,
                in_flight: None,
                fetcher: None,
                download_limiter: None,
                clock,
                out_dir: tmp.path().join("out"),
                retrieval_depth: RETRIEVAL_DEPTH,
                extra_stop_tokens: Vec::new(),
                config_snapshot: serde_json::json!({"profile": "test"}),
            };
            Self { tmp, ctx, backend }
        }

        pub fn write_jar(&self, name: &str, contents: &[u8]) -> PathBuf {
            let path = self.tmp.path().join(name);
            fs::write(&path, contents).unwrap();
            path
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testkit::*;
    use super::*;
    use crate::decompile::DecompilerRole;

    #[test]
    fn malicious_fixture_matches_planted_cve() {
        let fixture = TestPipeline::new(&default_script(), MALICIOUS_SOURCE);
        let jar = fixture.write_jar("evil.jar", b"PK evil");

        let report = run_analysis(&jar, &fixture.ctx).unwrap();
        assert_eq!(report.state, ReportState::Done);
        assert_eq!(report.decompile.status, DecompileStatus::Ok);
        assert!(report.code_summary.as_ref().is_some_and(|s| !s.is_benign()));
        assert_eq!(report.search_queries.len(), 3);
        assert_eq!(report.candidates[0].cve_id, PLANTED_CVE);
        assert_eq!(report.prediction.as_ref().unwrap().matched_cve, PLANTED_CVE);
        assert!(report.metadata.usage.per_model.contains_key("gpt-4o-mini"));
        assert!(!report.metadata.exchanges.is_empty());
        assert!(AnalysisReport::path_for(&fixture.ctx.out_dir, &report.file_sha256).is_file());
    }

    #[test]
    fn benign_verdict_short_circuits_retrieval() {
        let fixture = TestPipeline::new(&default_script(), BENIGN_SOURCE);
        let jar = fixture.write_jar("hello.jar", b"PK hello");

        let report = run_analysis(&jar, &fixture.ctx).unwrap();
        assert_eq!(report.state, ReportState::Done);
        assert!(report.code_summary.as_ref().is_some_and(|s| s.is_benign()));
        assert!(report.search_queries.is_empty());
        assert!(report.candidates.is_empty());
        assert!(report.prediction.is_none());
        // Only the summarize call happened.
        assert_eq!(fixture.backend.call_count(), 1);
    }

    #[test]
    fn double_decompile_failure_excludes_with_no_summary() {
        let mut fixture = TestPipeline::new(&default_script(), MALICIOUS_SOURCE);
        let bad1 = write_failing_decompiler(fixture.tmp.path(), "bad1");
        let bad2 = write_failing_decompiler(fixture.tmp.path(), "bad2");
        fixture.ctx.decompilers = vec![
            spec_for(&bad1, DecompilerRole::Primary, "cfr"),
            spec_for(&bad2, DecompilerRole::Fallback, "procyon"),
        ];
        let jar = fixture.write_jar("broken.jar", b"PK broken");

        let report = run_analysis(&jar, &fixture.ctx).unwrap();
        assert_eq!(report.state, ReportState::Excluded);
        assert!(report.code_summary.is_none());
        assert!(report.prediction.is_none());
        assert_eq!(fixture.backend.call_count(), 0);
        assert!(AnalysisReport::path_for(&fixture.ctx.out_dir, &report.file_sha256).is_file());
    }

    #[test]
    fn llm_schema_failure_is_recorded_not_dropped() {
        let script = serde_json::json!({
            "rules": [{"step": "summarize", "responses": [{"verdict": "Evil"}]}]
        })
        .to_string();
        let fixture = TestPipeline::new(&script, MALICIOUS_SOURCE);
        let jar = fixture.write_jar("evil.jar", b"PK evil");

        let report = run_analysis(&jar, &fixture.ctx).unwrap();
        assert_eq!(report.state, ReportState::Failed);
        let failure = report.failure.as_ref().unwrap();
        assert_eq!(failure.stage, "summarize");
        // Both attempts (original + repair reprompt) are preserved verbatim.
        assert_eq!(report.metadata.exchanges.len(), 2);
        assert!(report.metadata.exchanges[1].response.contains("Evil"));
    }

    #[test]
    fn reruns_are_byte_identical_under_a_fixed_clock() {
        let fixture = TestPipeline::new(&default_script(), MALICIOUS_SOURCE);
        let jar = fixture.write_jar("evil.jar", b"PK evil");

        let first = run_analysis(&jar, &fixture.ctx).unwrap();
        let path = AnalysisReport::path_for(&fixture.ctx.out_dir, &first.file_sha256);
        let bytes_first = fs::read(&path).unwrap();
        run_analysis(&jar, &fixture.ctx).unwrap();
        let bytes_second = fs::read(&path).unwrap();
        assert_eq!(bytes_first, bytes_second);
    }

    #[test]
    fn deobfuscation_summary_reports_folds() {
        let fixture = TestPipeline::new(&default_script(), MALICIOUS_SOURCE);
        let jar = fixture.write_jar("evil.jar", b"PK evil");

        let report = run_analysis(&jar, &fixture.ctx).unwrap();
        let folds = report.deobfuscation.as_ref().unwrap();
        assert_eq!(folds.files_processed, 1);
        assert_eq!(folds.files_changed, 1);
        assert!(folds.total_folds >= 2);

        // The folded literals reached the model inside the prompt.
        let calls = fixture.backend.calls();
        assert!(calls[0].prompt.contains("\"sun.awt.SunToolkit\""));
        assert!(calls[0].prompt.contains("\"getField\""));
    }
}
