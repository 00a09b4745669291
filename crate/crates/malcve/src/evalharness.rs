//! Metrics over analysis reports against a labeled ground-truth manifest.
//!
//! Three metrics are computed. Binary accuracy checks the verdict against
//! the malicious/benign label, with Suspicious counted as malicious.
//! Prediction accuracy is the fraction of emitted CVE predictions that name
//! a true CVE. Recall@k asks, for each malicious sample, whether a true CVE
//! appears among the first k ranked candidates. Metrics carry explicit
//! numerators and denominators; a zero denominator yields an undefined
//! value, never NaN.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::types::VerdictLabel;
use crate::pipeline::report::AnalysisReport;

/// Candidate-list depths reported by default.
pub const DEFAULT_KS: &[usize] = &[1, 3, 5, 10];

/// Note attached to every rendered table about the verdict mapping.
pub const TABLE_FOOTER: &str =
    "Verdicts Suspicious and Malicious both count as malicious for binary accuracy.";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no truth entry for: {}", .hashes.join(", "))]
    MissingTruth { hashes: Vec<String> },
    #[error("invalid k {k}: must be at least 1")]
    InvalidK { k: usize },
    #[error("truth manifest line {line}: {message}")]
    Truth { line: usize, message: String },
    #[error("reading {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Label for one sample: whether it is malicious and which CVEs it exploits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub file_sha256: String,
    pub is_malicious: bool,
    pub true_cves: Vec<String>,
}

/// Truth manifest keyed by lowercase sha256.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruthSet {
    entries: BTreeMap<String, GroundTruth>,
}

fn parse_bool(text: &str, line: usize) -> Result<bool, EvalError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(EvalError::Truth {
            line,
            message: format!("expected a boolean, got {other:?}"),
        }),
    }
}

impl GroundTruthSet {
    /// Parses CSV lines `sha256,is_malicious,cve_list` where `cve_list` is
    /// semicolon-separated and may be empty. Blank lines, `#` comments, and
    /// a `sha256,...` header line are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self, EvalError> {
        let mut entries = BTreeMap::new();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        for result in reader.records() {
            let record = result.map_err(|e| EvalError::Truth {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line_no = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record[0].eq_ignore_ascii_case("sha256") {
                continue;
            }
            if record.len() != 3 {
                return Err(EvalError::Truth {
                    line: line_no,
                    message: format!("expected 3 fields, got {}", record.len()),
                });
            }
            let sha = record[0].to_ascii_lowercase();
            if sha.len() != 64 || !sha.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(EvalError::Truth {
                    line: line_no,
                    message: format!("{:?} is not a sha256", &record[0]),
                });
            }
            let is_malicious = parse_bool(&record[1], line_no)?;
            let true_cves: Vec<String> = record[2]
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.to_ascii_uppercase())
                .collect();
            if !true_cves.is_empty() && !is_malicious {
                return Err(EvalError::Truth {
                    line: line_no,
                    message: "benign sample must not list CVEs".to_string(),
                });
            }
            let entry = GroundTruth {
                file_sha256: sha.clone(),
                is_malicious,
                true_cves,
            };
            if entries.insert(sha.clone(), entry).is_some() {
                return Err(EvalError::Truth {
                    line: line_no,
                    message: format!("duplicate sha256 {sha}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_csv_file(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    pub fn get(&self, sha256: &str) -> Option<&GroundTruth> {
        self.entries.get(&sha256.to_ascii_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundTruth> {
        self.entries.values()
    }

    pub fn malicious_count(&self) -> usize {
        self.entries.values().filter(|t| t.is_malicious).count()
    }
}

/// A ratio with its counts; `value` is `None` when the denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub numerator: usize,
    pub denominator: usize,
    pub value: Option<f64>,
}

impl Metric {
    pub fn ratio(numerator: usize, denominator: usize) -> Self {
        let value = if denominator == 0 {
            None
        } else {
            Some(numerator as f64 / denominator as f64)
        };
        Self {
            numerator,
            denominator,
            value,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some(v) => write!(f, "{v:.4} ({}/{})", self.numerator, self.denominator),
            None => write!(f, "n/a (0/0)"),
        }
    }
}

/// All metrics for one set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub accuracy_rq1: Metric,
    pub accuracy_rq2: Metric,
    pub recall_at: BTreeMap<usize, Metric>,
    pub n_files: usize,
}

fn check_truth_cover(reports: &[AnalysisReport], truth: &GroundTruthSet) -> Result<(), EvalError> {
    let missing: BTreeSet<String> = reports
        .iter()
        .filter(|r| truth.get(&r.file_sha256).is_none())
        .map(|r| r.file_sha256.to_ascii_lowercase())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(EvalError::MissingTruth {
            hashes: missing.into_iter().collect(),
        })
    }
}

/// Binary verdict accuracy: fraction of reports carrying a verdict whose
/// malicious/benign mapping matches the truth label.
pub fn accuracy_rq1(
    reports: &[AnalysisReport],
    truth: &GroundTruthSet,
) -> Result<Metric, EvalError> {
    check_truth_cover(reports, truth)?;
    let mut numerator = 0;
    let mut denominator = 0;
    for report in reports {
        let Some(summary) = &report.code_summary else {
            continue;
        };
        let entry = truth.get(&report.file_sha256).expect("cover checked");
        let predicted_malicious = summary.verdict.label != VerdictLabel::Benign;
        denominator += 1;
        if predicted_malicious == entry.is_malicious {
            numerator += 1;
        }
    }
    Ok(Metric::ratio(numerator, denominator))
}

/// Prediction accuracy: over reports that emitted a CVE prediction, the
/// fraction whose predicted id is one of the sample's true CVEs.
pub fn accuracy_rq2(
    reports: &[AnalysisReport],
    truth: &GroundTruthSet,
) -> Result<Metric, EvalError> {
    check_truth_cover(reports, truth)?;
    let mut numerator = 0;
    let mut denominator = 0;
    for report in reports {
        let Some(prediction) = &report.prediction else {
            continue;
        };
        let entry = truth.get(&report.file_sha256).expect("cover checked");
        denominator += 1;
        let predicted = prediction.matched_cve.to_ascii_uppercase();
        if entry.true_cves.contains(&predicted) {
            numerator += 1;
        }
    }
    Ok(Metric::ratio(numerator, denominator))
}

/// Recall@k: malicious samples whose true CVE appears among the first k
/// ranked candidates, over all malicious samples in the truth set. Samples
/// without a report count only toward the denominator.
pub fn recall_at_k(
    reports: &[AnalysisReport],
    truth: &GroundTruthSet,
    k: usize,
) -> Result<Metric, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK { k });
    }
    check_truth_cover(reports, truth)?;
    let denominator = truth.malicious_count();
    let mut numerator = 0;
    for report in reports {
        let entry = truth.get(&report.file_sha256).expect("cover checked");
        if !entry.is_malicious {
            continue;
        }
        let hit = report.candidates.iter().take(k).any(|c| {
            entry
                .true_cves
                .iter()
                .any(|cve| cve.eq_ignore_ascii_case(&c.cve_id))
        });
        if hit {
            numerator += 1;
        }
    }
    Ok(Metric::ratio(numerator, denominator))
}

/// Computes every metric over one set of reports.
pub fn compute_metrics(
    reports: &[AnalysisReport],
    truth: &GroundTruthSet,
    ks: &[usize],
) -> Result<MetricsTable, EvalError> {
    let mut recall_at = BTreeMap::new();
    for &k in ks {
        recall_at.insert(k, recall_at_k(reports, truth, k)?);
    }
    Ok(MetricsTable {
        accuracy_rq1: accuracy_rq1(reports, truth)?,
        accuracy_rq2: accuracy_rq2(reports, truth)?,
        recall_at,
        n_files: reports.len(),
    })
}

/// One evaluated run, tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub model: String,
    pub table: MetricsTable,
}

/// Population statistics over defined metric values from several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub std_dev: f64,
}

/// Population mean/max/min/stddev; `None` for an empty slice.
pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(Stats {
        mean,
        max,
        min,
        std_dev: variance.sqrt(),
    })
}

/// Aggregated rows for one model: statistics per metric across its runs.
/// A metric undefined in every run aggregates to `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub runs: usize,
    pub accuracy_rq1: Option<Stats>,
    pub accuracy_rq2: Option<Stats>,
    pub recall_at: BTreeMap<usize, Option<Stats>>,
}

/// The rendered evaluation: per-model rows plus the verdict-mapping note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub rows: Vec<ModelRow>,
    pub footer: String,
}

/// Groups runs by model and computes per-metric statistics.
pub fn summarize_runs(runs: &[RunMetrics]) -> EvalSummary {
    let mut by_model: BTreeMap<&str, Vec<&MetricsTable>> = BTreeMap::new();
    for run in runs {
        by_model.entry(&run.model).or_default().push(&run.table);
    }
    let rows = by_model
        .into_iter()
        .map(|(model, tables)| {
            let collect = |select: &dyn Fn(&MetricsTable) -> Option<f64>| -> Option<Stats> {
                let values: Vec<f64> = tables.iter().filter_map(|t| select(t)).collect();
                stats(&values)
            };
            let mut recall_at = BTreeMap::new();
            let ks: BTreeSet<usize> = tables
                .iter()
                .flat_map(|t| t.recall_at.keys().copied())
                .collect();
            for k in ks {
                recall_at.insert(
                    k,
                    collect(&|t: &MetricsTable| t.recall_at.get(&k).and_then(|m| m.value)),
                );
            }
            ModelRow {
                model: model.to_string(),
                runs: tables.len(),
                accuracy_rq1: collect(&|t: &MetricsTable| t.accuracy_rq1.value),
                accuracy_rq2: collect(&|t: &MetricsTable| t.accuracy_rq2.value),
                recall_at,
            }
        })
        .collect();
    EvalSummary {
        rows,
        footer: TABLE_FOOTER.to_string(),
    }
}

fn stat_cells(stats: &Option<Stats>) -> [String; 4] {
    match stats {
        Some(s) => [
            format!("{:.4}", s.mean),
            format!("{:.4}", s.max),
            format!("{:.4}", s.min),
            format!("{:.4}", s.std_dev),
        ],
        None => std::array::from_fn(|_| "n/a".to_string()),
    }
}

/// Renders the summary as an aligned plain-text table, one row per
/// model/metric pair with mean, max, min, and population stddev columns.
pub fn render_table(summary: &EvalSummary) -> String {
    let mut rows: Vec<[String; 6]> = Vec::new();
    for row in &summary.rows {
        let model = format!("{} (runs={})", row.model, row.runs);
        let mut push = |metric: &str, stats: &Option<Stats>| {
            let [mean, max, min, sd] = stat_cells(stats);
            rows.push([model.clone(), metric.to_string(), mean, max, min, sd]);
        };
        push("accuracy_rq1", &row.accuracy_rq1);
        push("accuracy_rq2", &row.accuracy_rq2);
        for (k, stats) in &row.recall_at {
            push(&format!("recall@{k}"), stats);
        }
    }
    let header = ["Model", "Metric", "Mean", "Max", "Min", "StdDev"];
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let render_row = |cells: &[String]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = String::new();
    out.push_str(&render_row(
        &header.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
    ));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&summary.footer);
    out.push('\n');
    out
}

/// Full evaluation output: the overall table plus per-model statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub overall: MetricsTable,
    pub per_model: EvalSummary,
}

/// Loads every `*.report.json` under `dir`, sorted by file name.
pub fn load_reports(dir: &Path) -> Result<Vec<AnalysisReport>, EvalError> {
    let io = |source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".report.json"))
        })
        .collect();
    paths.sort();
    let mut reports = Vec::with_capacity(paths.len());
    for path in paths {
        let report = AnalysisReport::load(&path).map_err(|source| EvalError::Io {
            path: path.clone(),
            source,
        })?;
        reports.push(report);
    }
    Ok(reports)
}

/// Evaluates a directory of reports: overall metrics plus per-model rows,
/// where each distinct summarize model in the reports forms one run.
pub fn evaluate_reports(
    reports: &[AnalysisReport],
    truth: &GroundTruthSet,
    ks: &[usize],
) -> Result<EvalOutput, EvalError> {
    let overall = compute_metrics(reports, truth, ks)?;
    let mut by_model: BTreeMap<String, Vec<AnalysisReport>> = BTreeMap::new();
    for report in reports {
        by_model
            .entry(report.metadata.llm.summarize_model.clone())
            .or_default()
            .push(report.clone());
    }
    let mut runs = Vec::new();
    for (model, group) in by_model {
        runs.push(RunMetrics {
            model,
            table: compute_metrics(&group, truth, ks)?,
        });
    }
    Ok(EvalOutput {
        overall,
        per_model: summarize_runs(&runs),
    })
}
