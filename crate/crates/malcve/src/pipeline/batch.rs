//! Batch execution over a manifest of samples.
//!
//! A manifest line is either a sha256 (fetched by the download worker) or a
//! path to a local JAR. One download worker and `worker_count` analysis
//! workers run concurrently over in-process channels. Progress is appended
//! to a journal file, and inputs whose report already exists on disk are
//! skipped, so an interrupted batch can simply be rerun.

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crossbeam_channel as channel;
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::{io_err, run_analysis, PipelineContext, PipelineError};
use crate::cve_kb::sha256_hex;
use crate::llm::cost::format_pico;
use crate::pipeline::report::{AnalysisReport, ReportState};

pub const JOURNAL_FILE: &str = "batch.journal.jsonl";

/// Lifecycle of one work item; terminal states are done/failed/excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkState {
    QueuedDownload,
    Downloaded,
    QueuedAnalysis,
    Analyzing,
    Done,
    Failed,
    Excluded,
}

impl From<ReportState> for WorkState {
    fn from(state: ReportState) -> Self {
        match state {
            ReportState::Done => WorkState::Done,
            ReportState::Failed => WorkState::Failed,
            ReportState::Excluded => WorkState::Excluded,
        }
    }
}

/// One manifest entry: a sample hash to fetch or a local file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkSource {
    Path(PathBuf),
    Hash(String),
}

impl WorkSource {
    pub fn id(&self) -> String {
        match self {
            WorkSource::Path(path) => path.display().to_string(),
            WorkSource::Hash(hash) => hash.clone(),
        }
    }
}

fn is_sha256(text: &str) -> bool {
    text.len() == 64 && text.chars().all(|c| c.is_ascii_hexdigit())
}

/// Parses a manifest: one sha256 or path per line, `#` comments and blank
/// lines ignored, relative paths resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Vec<WorkSource> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(|line| {
            if is_sha256(line) {
                WorkSource::Hash(line.to_lowercase())
            } else {
                let path = PathBuf::from(line);
                if path.is_absolute() {
                    WorkSource::Path(path)
                } else {
                    WorkSource::Path(base_dir.join(path))
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JournalEntry {
    pub id: String,
    pub state: WorkState,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Append-only JSONL progress log, shared across workers.
pub struct Journal {
    file: Mutex<File>,
}

impl Journal {
    pub fn open_append(out_dir: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(out_dir.join(JOURNAL_FILE))?;
        Ok(Self {
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, id: &str, state: WorkState, attempts: u32, note: Option<String>) {
        let entry = JournalEntry {
            id: id.to_string(),
            state,
            attempts,
            note,
        };
        let mut line = serde_json::to_string(&entry).expect("journal entry serializes");
        line.push('\n');
        let mut file = self.file.lock().unwrap();
        let _ = file.write_all(line.as_bytes());
        let _ = file.flush();
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub done: usize,
    pub failed: usize,
    pub excluded: usize,
    /// Items whose report already existed and was skipped.
    pub resumed: usize,
    /// Cost accumulated by this batch, in pico-currency.
    pub total_cost_pico: u128,
    pub total_cost_display: String,
}

struct AnalysisJob {
    id: String,
    path: PathBuf,
    sha256: Option<String>,
}

struct Outcome {
    state: ReportState,
    resumed: bool,
}

/// Runs every manifest item to a terminal state and returns the counts.
/// Reports land at `out/<sha256>.report.json`; already-reported items are
/// counted as resumed without re-analysis.
pub fn run_batch(
    sources: &[WorkSource],
    worker_count: usize,
    ctx: &PipelineContext,
) -> Result<BatchSummary, PipelineError> {
    let worker_count = worker_count.max(1);
    fs::create_dir_all(&ctx.out_dir).map_err(io_err(&ctx.out_dir))?;
    let journal = Journal::open_append(&ctx.out_dir).map_err(io_err(&ctx.out_dir))?;
    let start_cost = ctx.ledger.cost_pico();
    let jar_dir = TempDir::new().map_err(io_err(Path::new("tempdir")))?;

    let (job_tx, job_rx) = channel::unbounded::<AnalysisJob>();
    let (outcome_tx, outcome_rx) = channel::unbounded::<Outcome>();

    let hashes: Vec<String> = sources
        .iter()
        .filter_map(|s| match s {
            WorkSource::Hash(h) => Some(h.clone()),
            WorkSource::Path(_) => None,
        })
        .collect();

    let mut summary = BatchSummary::default();
    std::thread::scope(|scope| {
        for source in sources {
            if let WorkSource::Path(path) = source {
                journal.append(&source.id(), WorkState::QueuedAnalysis, 0, None);
                job_tx
                    .send(AnalysisJob {
                        id: source.id(),
                        path: path.clone(),
                        sha256: None,
                    })
                    .expect("receiver alive");
            }
        }

        {
            let job_tx = job_tx.clone();
            let outcome_tx = outcome_tx.clone();
            let journal = &journal;
            let jar_dir = jar_dir.path().to_path_buf();
            let hashes = hashes.clone();
            scope.spawn(move || {
                download_stage(&hashes, ctx, journal, &jar_dir, &job_tx, &outcome_tx);
            });
        }
        drop(job_tx);

        for _ in 0..worker_count {
            let job_rx = job_rx.clone();
            let outcome_tx = outcome_tx.clone();
            let journal = &journal;
            scope.spawn(move || {
                while let Ok(job) = job_rx.recv() {
                    let outcome = analyze_job(&job, ctx, journal);
                    let _ = outcome_tx.send(outcome);
                }
            });
        }
        drop(outcome_tx);

        for outcome in outcome_rx.iter() {
            if outcome.resumed {
                summary.resumed += 1;
            }
            match outcome.state {
                ReportState::Done => summary.done += 1,
                ReportState::Failed => summary.failed += 1,
                ReportState::Excluded => summary.excluded += 1,
            }
        }
    });

    summary.total_cost_pico = ctx.ledger.cost_pico() - start_cost;
    summary.total_cost_display = format_pico(summary.total_cost_pico);
    Ok(summary)
}

fn download_stage(
    hashes: &[String],
    ctx: &PipelineContext,
    journal: &Journal,
    jar_dir: &Path,
    job_tx: &channel::Sender<AnalysisJob>,
    outcome_tx: &channel::Sender<Outcome>,
) {
    for hash in hashes {
        journal.append(hash, WorkState::QueuedDownload, 0, None);
        if let Some(state) = existing_report_state(ctx, hash) {
            let _ = outcome_tx.send(Outcome {
                state,
                resumed: true,
            });
            continue;
        }
        let Some(fetcher) = &ctx.fetcher else {
            journal.append(
                hash,
                WorkState::Failed,
                1,
                Some("no fetcher configured".to_string()),
            );
            let _ = outcome_tx.send(Outcome {
                state: ReportState::Failed,
                resumed: false,
            });
            continue;
        };
        if let Some(limiter) = &ctx.download_limiter {
            limiter.acquire();
        }
        match fetcher.fetch(hash) {
            Ok(bytes) => {
                let path = jar_dir.join(format!("{hash}.jar"));
                if let Err(err) = fs::write(&path, &bytes) {
                    journal.append(hash, WorkState::Failed, 1, Some(err.to_string()));
                    let _ = outcome_tx.send(Outcome {
                        state: ReportState::Failed,
                        resumed: false,
                    });
                    continue;
                }
                journal.append(hash, WorkState::Downloaded, 1, None);
                journal.append(hash, WorkState::QueuedAnalysis, 1, None);
                let _ = job_tx.send(AnalysisJob {
                    id: hash.clone(),
                    path,
                    sha256: Some(hash.clone()),
                });
            }
            Err(err) => {
                journal.append(hash, WorkState::Failed, 1, Some(err.to_string()));
                let _ = outcome_tx.send(Outcome {
                    state: ReportState::Failed,
                    resumed: false,
                });
            }
        }
    }
}

fn analyze_job(job: &AnalysisJob, ctx: &PipelineContext, journal: &Journal) -> Outcome {
    let sha256 = match &job.sha256 {
        Some(sha) => sha.clone(),
        None => match fs::read(&job.path) {
            Ok(bytes) => sha256_hex(&bytes),
            Err(err) => {
                journal.append(&job.id, WorkState::Failed, 1, Some(err.to_string()));
                return Outcome {
                    state: ReportState::Failed,
                    resumed: false,
                };
            }
        },
    };
    if let Some(state) = existing_report_state(ctx, &sha256) {
        return Outcome {
            state,
            resumed: true,
        };
    }
    journal.append(&job.id, WorkState::Analyzing, 1, None);
    match run_analysis(&job.path, ctx) {
        Ok(report) => {
            journal.append(&job.id, WorkState::from(report.state), 1, None);
            Outcome {
                state: report.state,
                resumed: false,
            }
        }
        Err(err) => {
            journal.append(&job.id, WorkState::Failed, 1, Some(err.to_string()));
            Outcome {
                state: ReportState::Failed,
                resumed: false,
            }
        }
    }
}

fn existing_report_state(ctx: &PipelineContext, sha256: &str) -> Option<ReportState> {
    let path = AnalysisReport::path_for(&ctx.out_dir, sha256);
    AnalysisReport::load(&path).ok().map(|report| report.state)
}
