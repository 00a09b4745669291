//! External Java decompiler orchestration with primary/fallback semantics.
//!
//! Decompilers are arbitrary subprocess command templates with `{jar}` and
//! `{outdir}` placeholders, substituted verbatim with no shell involved. The
//! primary tool runs first; on nonzero exit, timeout, or empty output each
//! fallback is tried in order. A run counts as successful only when the tool
//! exits 0 and leaves at least one nonempty `.java` file in its output
//! directory, because some decompilers exit 0 on partial failure. When every
//! tool fails the input is excluded from further analysis.

use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

/// Default per-tool timeout in seconds.
pub const DEFAULT_TOOL_TIMEOUT_SECS: u64 = 120;

/// Poll interval while waiting for a child process.
const WAIT_POLL: Duration = Duration::from_millis(20);

/// Maximum number of characters of tool output kept in diagnostics.
const DIAG_TAIL_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum DecompileError {
    #[error("no primary decompiler configured")]
    NoPrimary,
    #[error("multiple primary decompilers configured: {0} and {1}")]
    MultiplePrimaries(String, String),
    #[error("decompiler {name}: command template is empty")]
    EmptyTemplate { name: String },
    #[error("decompiler {name}: executable {program:?} not found")]
    ToolNotFound { name: String, program: String },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Position of a tool in the fallback chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompilerRole {
    Primary,
    Fallback,
}

/// One configured decompiler invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompilerSpec {
    pub name: String,
    /// Argv template; each element may contain `{jar}` and `{outdir}`
    /// placeholders. Configs may also give a single string, which is split
    /// on whitespace.
    #[serde(deserialize_with = "argv_or_line")]
    pub command_template: Vec<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    pub role: DecompilerRole,
}

fn default_timeout_secs() -> u64 {
    DEFAULT_TOOL_TIMEOUT_SECS
}

fn argv_or_line<'de, D>(deserializer: D) -> Result<Vec<String>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Argv(Vec<String>),
        Line(String),
    }
    Ok(match Raw::deserialize(deserializer)? {
        Raw::Argv(argv) => argv,
        Raw::Line(line) => line.split_whitespace().map(str::to_string).collect(),
    })
}

impl DecompilerSpec {
    pub fn new(name: &str, argv: Vec<String>, role: DecompilerRole) -> Self {
        Self {
            name: name.to_string(),
            command_template: argv,
            timeout_secs: DEFAULT_TOOL_TIMEOUT_SECS,
            role,
        }
    }

    /// Builds a spec from a single command line, split on whitespace.
    pub fn from_template(name: &str, template: &str, role: DecompilerRole) -> Self {
        let argv = template.split_whitespace().map(str::to_string).collect();
        Self::new(name, argv, role)
    }

    pub fn with_timeout_secs(mut self, secs: u64) -> Self {
        self.timeout_secs = secs;
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

/// Stock tool chain: CFR 0.152 first, Procyon 0.6.0 as fallback.
pub fn default_specs() -> Vec<DecompilerSpec> {
    vec![
        DecompilerSpec::from_template(
            "cfr",
            "java -jar cfr-0.152.jar {jar} --outputdir {outdir}",
            DecompilerRole::Primary,
        ),
        DecompilerSpec::from_template(
            "procyon",
            "java -jar procyon-decompiler-0.6.0.jar {jar} -o {outdir}",
            DecompilerRole::Fallback,
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompileStatus {
    Ok,
    Failed,
    Excluded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompileResult {
    pub status: DecompileStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_used: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_dir: Option<PathBuf>,
    pub diagnostics: String,
}

/// Runs the primary decompiler, then each fallback in order, until one
/// produces output. Every tool failing yields `Excluded` with the
/// concatenated per-tool diagnostics. A missing executable is a
/// configuration error, not a decompilation failure.
pub fn decompile(
    jar_path: &Path,
    specs: &[DecompilerSpec],
    workdir: &Path,
) -> Result<DecompileResult, DecompileError> {
    let ordered = ordered_specs(specs)?;
    if !jar_path.is_file() {
        return Err(DecompileError::Io {
            path: jar_path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "input jar not found"),
        });
    }
    fs::create_dir_all(workdir).map_err(|source| DecompileError::Io {
        path: workdir.to_path_buf(),
        source,
    })?;

    let mut notes: Vec<String> = Vec::new();
    for spec in ordered {
        let outdir = workdir.join(&spec.name);
        let attempt = run_decompiler(spec, jar_path, &outdir)?;
        if !attempt.diagnostics.is_empty() {
            notes.push(format!("{}: {}", spec.name, attempt.diagnostics));
        }
        if attempt.status == DecompileStatus::Ok {
            return Ok(DecompileResult {
                status: DecompileStatus::Ok,
                tool_used: attempt.tool_used,
                source_dir: attempt.source_dir,
                diagnostics: notes.join("; "),
            });
        }
    }
    Ok(DecompileResult {
        status: DecompileStatus::Excluded,
        tool_used: None,
        source_dir: None,
        diagnostics: notes.join("; "),
    })
}

/// Orders specs primary-first and validates that exactly one primary exists.
fn ordered_specs(specs: &[DecompilerSpec]) -> Result<Vec<&DecompilerSpec>, DecompileError> {
    let mut primary: Option<&DecompilerSpec> = None;
    let mut fallbacks: Vec<&DecompilerSpec> = Vec::new();
    for spec in specs {
        match spec.role {
            DecompilerRole::Primary => {
                if let Some(first) = primary {
                    return Err(DecompileError::MultiplePrimaries(
                        first.name.clone(),
                        spec.name.clone(),
                    ));
                }
                primary = Some(spec);
            }
            DecompilerRole::Fallback => fallbacks.push(spec),
        }
    }
    let primary = primary.ok_or(DecompileError::NoPrimary)?;
    let mut ordered = vec![primary];
    ordered.extend(fallbacks);
    Ok(ordered)
}

/// Runs a single tool against one jar. Returns status `Ok` or `Failed`;
/// spawn problems caused by configuration surface as errors.
pub fn run_decompiler(
    spec: &DecompilerSpec,
    jar_path: &Path,
    outdir: &Path,
) -> Result<DecompileResult, DecompileError> {
    fs::create_dir_all(outdir).map_err(|source| DecompileError::Io {
        path: outdir.to_path_buf(),
        source,
    })?;

    let jar_str = jar_path.to_string_lossy();
    let outdir_str = outdir.to_string_lossy();
    let argv: Vec<String> = spec
        .command_template
        .iter()
        .map(|part| {
            part.replace("{jar}", &jar_str)
                .replace("{outdir}", &outdir_str)
        })
        .collect();
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| DecompileError::EmptyTemplate {
            name: spec.name.clone(),
        })?;

    let log_path = outdir.with_extension("log");
    let log = File::create(&log_path).map_err(|source| DecompileError::Io {
        path: log_path.clone(),
        source,
    })?;
    let log_err = log.try_clone().map_err(|source| DecompileError::Io {
        path: log_path.clone(),
        source,
    })?;

    let spawned = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::from(log))
        .stderr(Stdio::from(log_err))
        .spawn();
    let mut child = match spawned {
        Ok(child) => child,
        Err(err) if err.kind() == io::ErrorKind::NotFound => {
            return Err(DecompileError::ToolNotFound {
                name: spec.name.clone(),
                program: program.clone(),
            });
        }
        Err(source) => {
            return Err(DecompileError::Io {
                path: PathBuf::from(program),
                source,
            });
        }
    };

    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if started.elapsed() >= spec.timeout() {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(failed(
                        spec,
                        outdir,
                        format!("timed out after {}s", spec.timeout_secs),
                    ));
                }
                std::thread::sleep(WAIT_POLL);
            }
            Err(source) => {
                let _ = child.kill();
                return Err(DecompileError::Io {
                    path: PathBuf::from(program),
                    source,
                });
            }
        }
    };

    if !status.success() {
        let mut note = format!("exited with {status}");
        let tail = read_tail(&log_path);
        if !tail.is_empty() {
            note.push_str(&format!("; output: {tail}"));
        }
        return Ok(failed(spec, outdir, note));
    }
    if !has_java_output(outdir) {
        return Ok(failed(
            spec,
            outdir,
            "exited 0 but wrote no nonempty .java files".to_string(),
        ));
    }
    Ok(DecompileResult {
        status: DecompileStatus::Ok,
        tool_used: Some(spec.name.clone()),
        source_dir: Some(outdir.to_path_buf()),
        diagnostics: String::new(),
    })
}

fn failed(spec: &DecompilerSpec, outdir: &Path, note: String) -> DecompileResult {
    let _ = fs::remove_dir_all(outdir);
    DecompileResult {
        status: DecompileStatus::Failed,
        tool_used: Some(spec.name.clone()),
        source_dir: None,
        diagnostics: note,
    }
}

fn has_java_output(outdir: &Path) -> bool {
    WalkDir::new(outdir)
        .into_iter()
        .filter_map(Result::ok)
        .any(|entry| {
            entry.file_type().is_file()
                && entry.path().extension().is_some_and(|ext| ext == "java")
                && entry.metadata().is_ok_and(|meta| meta.len() > 0)
        })
}

fn read_tail(log_path: &Path) -> String {
    let text = fs::read_to_string(log_path).unwrap_or_default();
    let trimmed = text.trim();
    let chars: Vec<char> = trimmed.chars().collect();
    if chars.len() > DIAG_TAIL_CHARS {
        chars[chars.len() - DIAG_TAIL_CHARS..].iter().collect()
    } else {
        trimmed.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_stub(dir: &Path, name: &str, body: &str) -> PathBuf {
        use std::os::unix::fs::PermissionsExt;
        let path = dir.join(name);
        fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        let mut perm = fs::metadata(&path).unwrap().permissions();
        perm.set_mode(0o755);
        fs::set_permissions(&path, perm).unwrap();
        path
    }

    fn stub_spec(script: &Path, role: DecompilerRole, name: &str) -> DecompilerSpec {
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

    fn count_runs(counter: &Path) -> usize {
        fs::read_to_string(counter)
            .map(|s| s.lines().count())
            .unwrap_or(0)
    }

    fn succeed_body(counter: &Path) -> String {
        format!(
            "echo x >> {c}\nmkdir -p \"$2\"\nprintf 'class A {{}}' > \"$2/A.java\"\nexit 0",
            c = counter.display()
        )
    }

    fn fail_body(counter: &Path) -> String {
        format!(
            "echo x >> {c}\necho boom >&2\nexit 1",
            c = counter.display()
        )
    }

    fn fake_jar(dir: &Path) -> PathBuf {
        let jar = dir.join("sample.jar");
        fs::write(&jar, b"PK\x03\x04").unwrap();
        jar
    }

    #[test]
    fn primary_success_uses_primary() {
        let tmp = TempDir::new().unwrap();
        let counter = tmp.path().join("count");
        let script = write_stub(tmp.path(), "ok.sh", &succeed_body(&counter));
        let jar = fake_jar(tmp.path());
        let specs = vec![stub_spec(&script, DecompilerRole::Primary, "cfr")];

        let result = decompile(&jar, &specs, &tmp.path().join("work")).unwrap();
        assert_eq!(result.status, DecompileStatus::Ok);
        assert_eq!(result.tool_used.as_deref(), Some("cfr"));
        let dir = result.source_dir.unwrap();
        assert!(dir.join("A.java").is_file());
        assert!(result.diagnostics.is_empty());
        assert_eq!(count_runs(&counter), 1);
    }

    #[test]
    fn fallback_runs_exactly_once_when_primary_fails() {
        let tmp = TempDir::new().unwrap();
        let c_primary = tmp.path().join("count_primary");
        let c_fallback = tmp.path().join("count_fallback");
        let bad = write_stub(tmp.path(), "bad.sh", &fail_body(&c_primary));
        let good = write_stub(tmp.path(), "good.sh", &succeed_body(&c_fallback));
        let jar = fake_jar(tmp.path());
        let specs = vec![
            stub_spec(&bad, DecompilerRole::Primary, "cfr"),
            stub_spec(&good, DecompilerRole::Fallback, "procyon"),
        ];

        let result = decompile(&jar, &specs, &tmp.path().join("work")).unwrap();
        assert_eq!(result.status, DecompileStatus::Ok);
        assert_eq!(result.tool_used.as_deref(), Some("procyon"));
        assert!(result.diagnostics.contains("cfr"));
        assert!(result.diagnostics.contains("boom"));
        assert_eq!(count_runs(&c_primary), 1);
        assert_eq!(count_runs(&c_fallback), 1);
    }

    #[test]
    fn both_failing_excludes_the_input() {
        let tmp = TempDir::new().unwrap();
        let c_primary = tmp.path().join("count_primary");
        let c_fallback = tmp.path().join("count_fallback");
        let bad1 = write_stub(tmp.path(), "bad1.sh", &fail_body(&c_primary));
        let bad2 = write_stub(tmp.path(), "bad2.sh", &fail_body(&c_fallback));
        let jar = fake_jar(tmp.path());
        let specs = vec![
            stub_spec(&bad1, DecompilerRole::Primary, "cfr"),
            stub_spec(&bad2, DecompilerRole::Fallback, "procyon"),
        ];

        let result = decompile(&jar, &specs, &tmp.path().join("work")).unwrap();
        assert_eq!(result.status, DecompileStatus::Excluded);
        assert!(result.tool_used.is_none());
        assert!(result.source_dir.is_none());
        assert!(result.diagnostics.contains("cfr"));
        assert!(result.diagnostics.contains("procyon"));
        assert_eq!(count_runs(&c_primary), 1);
        assert_eq!(count_runs(&c_fallback), 1);
    }

    #[test]
    fn fallback_is_skipped_when_primary_succeeds() {
        let tmp = TempDir::new().unwrap();
        let c_primary = tmp.path().join("count_primary");
        let c_fallback = tmp.path().join("count_fallback");
        let good = write_stub(tmp.path(), "good.sh", &succeed_body(&c_primary));
        let other = write_stub(tmp.path(), "other.sh", &succeed_body(&c_fallback));
        let jar = fake_jar(tmp.path());
        let specs = vec![
            stub_spec(&good, DecompilerRole::Primary, "cfr"),
            stub_spec(&other, DecompilerRole::Fallback, "procyon"),
        ];

        let result = decompile(&jar, &specs, &tmp.path().join("work")).unwrap();
        assert_eq!(result.status, DecompileStatus::Ok);
        assert_eq!(count_runs(&c_primary), 1);
        assert_eq!(count_runs(&c_fallback), 0);
    }

    #[test]
    fn exit_zero_without_output_counts_as_failure() {
        let tmp = TempDir::new().unwrap();
        let counter = tmp.path().join("count");
        let silent = write_stub(
            tmp.path(),
            "silent.sh",
            &format!("echo x >> {}\nexit 0", counter.display()),
        );
        let jar = fake_jar(tmp.path());
        let specs = vec![stub_spec(&silent, DecompilerRole::Primary, "cfr")];

        let result = decompile(&jar, &specs, &tmp.path().join("work")).unwrap();
        assert_eq!(result.status, DecompileStatus::Excluded);
        assert!(result.diagnostics.contains("no nonempty .java"));
    }

    #[test]
    fn empty_java_file_does_not_count_as_output() {
        let tmp = TempDir::new().unwrap();
        let body = "mkdir -p \"$2\"\ntouch \"$2/A.java\"\nexit 0";
        let script = write_stub(tmp.path(), "empty.sh", body);
        let jar = fake_jar(tmp.path());
        let specs = vec![stub_spec(&script, DecompilerRole::Primary, "cfr")];

        let result = decompile(&jar, &specs, &tmp.path().join("work")).unwrap();
        assert_eq!(result.status, DecompileStatus::Excluded);
    }

    #[test]
    fn missing_binary_is_a_configuration_error() {
        let tmp = TempDir::new().unwrap();
        let jar = fake_jar(tmp.path());
        let spec = DecompilerSpec::from_template(
            "cfr",
            "/no/such/decompiler-binary {jar} {outdir}",
            DecompilerRole::Primary,
        );

        let err = decompile(&jar, &[spec], &tmp.path().join("work")).unwrap_err();
        assert!(matches!(err, DecompileError::ToolNotFound { .. }));
    }

    #[test]
    fn slow_tool_is_killed_at_timeout() {
        let tmp = TempDir::new().unwrap();
        let counter = tmp.path().join("count");
        let slow = write_stub(
            tmp.path(),
            "slow.sh",
            &format!("echo x >> {}\nsleep 30\nexit 0", counter.display()),
        );
        let jar = fake_jar(tmp.path());
        let specs = vec![stub_spec(&slow, DecompilerRole::Primary, "cfr").with_timeout_secs(1)];

        let started = Instant::now();
        let result = decompile(&jar, &specs, &tmp.path().join("work")).unwrap();
        assert!(started.elapsed() < Duration::from_secs(10));
        assert_eq!(result.status, DecompileStatus::Excluded);
        assert!(result.diagnostics.contains("timed out after 1s"));
        assert_eq!(count_runs(&counter), 1);
    }

    #[test]
    fn placeholders_substitute_inside_larger_tokens() {
        let tmp = TempDir::new().unwrap();
        let body = "out=${2#--outputdir=}\nmkdir -p \"$out\"\nprintf 'class A {}' > \"$out/A.java\"\nexit 0";
        let script = write_stub(tmp.path(), "flag.sh", body);
        let jar = fake_jar(tmp.path());
        let spec = DecompilerSpec::new(
            "cfr",
            vec![
                script.to_string_lossy().into_owned(),
                "{jar}".to_string(),
                "--outputdir={outdir}".to_string(),
            ],
            DecompilerRole::Primary,
        );

        let result = decompile(&jar, &[spec], &tmp.path().join("work")).unwrap();
        assert_eq!(result.status, DecompileStatus::Ok);
    }

    #[test]
    fn spec_validation_requires_exactly_one_primary() {
        let tmp = TempDir::new().unwrap();
        let jar = fake_jar(tmp.path());
        let fallback_only = vec![DecompilerSpec::from_template(
            "procyon",
            "true {jar} {outdir}",
            DecompilerRole::Fallback,
        )];
        assert!(matches!(
            decompile(&jar, &fallback_only, &tmp.path().join("w1")).unwrap_err(),
            DecompileError::NoPrimary
        ));

        let two_primaries = vec![
            DecompilerSpec::from_template("a", "true {jar} {outdir}", DecompilerRole::Primary),
            DecompilerSpec::from_template("b", "true {jar} {outdir}", DecompilerRole::Primary),
        ];
        assert!(matches!(
            decompile(&jar, &two_primaries, &tmp.path().join("w2")).unwrap_err(),
            DecompileError::MultiplePrimaries(..)
        ));
    }

    #[test]
    fn command_template_deserializes_from_string_or_array() {
        let from_line: DecompilerSpec = serde_json::from_str(
            r#"{"name":"cfr","command_template":"java -jar cfr.jar {jar} --outputdir {outdir}","role":"primary"}"#,
        )
        .unwrap();
        assert_eq!(from_line.command_template[0], "java");
        assert_eq!(from_line.command_template.len(), 6);
        assert_eq!(from_line.timeout_secs, DEFAULT_TOOL_TIMEOUT_SECS);

        let from_argv: DecompilerSpec = serde_json::from_str(
            r#"{"name":"p","command_template":["p.sh","{jar}","{outdir}"],"timeout_secs":9,"role":"fallback"}"#,
        )
        .unwrap();
        assert_eq!(from_argv.command_template.len(), 3);
        assert_eq!(from_argv.timeout_secs, 9);
        assert_eq!(from_argv.role, DecompilerRole::Fallback);
    }

    #[test]
    fn default_chain_is_cfr_then_procyon() {
        let specs = default_specs();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].name, "cfr");
        assert_eq!(specs[0].role, DecompilerRole::Primary);
        assert_eq!(specs[1].name, "procyon");
        assert_eq!(specs[1].role, DecompilerRole::Fallback);
    }
}
