//! String deobfuscation for decompiled Java sources.
//!
//! [`fold_source`] rewrites one compilation unit; [`deobfuscate_dir`] walks
//! a directory tree of `.java` files, folding each and either writing the
//! result back or (dry run) reporting unified diffs. Files the lexer cannot
//! process are left byte-identical and reported as diagnostics.

pub mod folder;
pub mod lexer;

pub use folder::{escape_char_literal, escape_string_literal, fold_source, FoldOutcome};

use std::fs;
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

#[derive(Debug, Clone)]
pub struct FileOutcome {
    pub path: PathBuf,
    pub folds: usize,
    pub changed: bool,
    pub diagnostics: Vec<String>,
    /// Unified diff of the would-be change; populated only when requested.
    pub diff: Option<String>,
}

/// Folds every `.java` file under `root` in path order. With `apply` false
/// nothing is written. With `want_diff` true each changed file carries a
/// unified diff against its original content.
pub fn deobfuscate_dir(
    root: &Path,
    apply: bool,
    want_diff: bool,
) -> std::io::Result<Vec<FileOutcome>> {
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter(|e| e.path().extension().is_some_and(|x| x == "java"))
        .map(|e| e.into_path())
        .collect();
    files.sort();

    let mut outcomes = Vec::with_capacity(files.len());
    for path in files {
        let raw = fs::read(&path)?;
        let source = match String::from_utf8(raw) {
            Ok(s) => s,
            Err(_) => {
                outcomes.push(FileOutcome {
                    path,
                    folds: 0,
                    changed: false,
                    diagnostics: vec!["not valid UTF-8; skipped".to_string()],
                    diff: None,
                });
                continue;
            }
        };
        let outcome = fold_source(&source);
        let changed = outcome.text != source;
        if apply && changed {
            fs::write(&path, &outcome.text)?;
        }
        let diff = (want_diff && changed).then(|| {
            let label = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .into_owned();
            unified_diff(&source, &outcome.text, &label)
        });
        outcomes.push(FileOutcome {
            path,
            folds: outcome.folds,
            changed,
            diagnostics: outcome.diagnostics,
            diff,
        });
    }
    Ok(outcomes)
}

/// Upper bound on the LCS table; beyond it the changed region is emitted as
/// one delete/insert block instead.
const LCS_CELL_CAP: usize = 4_000_000;

/// Classic unified diff (3 lines of context). Returns an empty string when
/// the inputs are identical.
pub fn unified_diff(old: &str, new: &str, label: &str) -> String {
    let a: Vec<&str> = old.lines().collect();
    let b: Vec<&str> = new.lines().collect();
    let script = edit_script(&a, &b);
    if script.iter().all(|(c, _)| *c == ' ') {
        return String::new();
    }

    let mut a_pos = vec![0usize; script.len() + 1];
    let mut b_pos = vec![0usize; script.len() + 1];
    for (i, (c, _)) in script.iter().enumerate() {
        a_pos[i + 1] = a_pos[i] + usize::from(matches!(c, ' ' | '-'));
        b_pos[i + 1] = b_pos[i] + usize::from(matches!(c, ' ' | '+'));
    }

    let mut hunks: Vec<(usize, usize)> = Vec::new();
    for (i, (c, _)) in script.iter().enumerate() {
        if *c == ' ' {
            continue;
        }
        let start = i.saturating_sub(3);
        let end = (i + 4).min(script.len());
        match hunks.last_mut() {
            Some(last) if start <= last.1 => last.1 = end.max(last.1),
            _ => hunks.push((start, end)),
        }
    }

    let mut out = format!("--- a/{label}\n+++ b/{label}\n");
    for (s, e) in hunks {
        let old_count = a_pos[e] - a_pos[s];
        let new_count = b_pos[e] - b_pos[s];
        let old_start = a_pos[s] + usize::from(old_count > 0);
        let new_start = b_pos[s] + usize::from(new_count > 0);
        out.push_str(&format!(
            "@@ -{old_start},{old_count} +{new_start},{new_count} @@\n"
        ));
        for (c, line) in &script[s..e] {
            out.push(*c);
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Line-level edit script: `(' '|'-'|'+', line)` entries. Common prefix and
/// suffix are matched directly; the middle uses LCS.
fn edit_script<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<(char, &'a str)> {
    let mut prefix = 0usize;
    while prefix < a.len() && prefix < b.len() && a[prefix] == b[prefix] {
        prefix += 1;
    }
    let mut suffix = 0usize;
    while suffix < a.len() - prefix
        && suffix < b.len() - prefix
        && a[a.len() - 1 - suffix] == b[b.len() - 1 - suffix]
    {
        suffix += 1;
    }
    let mid_a = &a[prefix..a.len() - suffix];
    let mid_b = &b[prefix..b.len() - suffix];

    let mut script: Vec<(char, &str)> = Vec::with_capacity(a.len() + b.len());
    script.extend(a[..prefix].iter().map(|l| (' ', *l)));

    if mid_a.len() * mid_b.len() > LCS_CELL_CAP || mid_a.is_empty() || mid_b.is_empty() {
        script.extend(mid_a.iter().map(|l| ('-', *l)));
        script.extend(mid_b.iter().map(|l| ('+', *l)));
    } else {
        // LCS table: lcs[i][j] = longest common subsequence of mid_a[i..]
        // and mid_b[j..].
        let (n, m) = (mid_a.len(), mid_b.len());
        let mut lcs = vec![0u32; (n + 1) * (m + 1)];
        for i in (0..n).rev() {
            for j in (0..m).rev() {
                lcs[i * (m + 1) + j] = if mid_a[i] == mid_b[j] {
                    lcs[(i + 1) * (m + 1) + j + 1] + 1
                } else {
                    lcs[(i + 1) * (m + 1) + j].max(lcs[i * (m + 1) + j + 1])
                };
            }
        }
        let (mut i, mut j) = (0usize, 0usize);
        while i < n && j < m {
            if mid_a[i] == mid_b[j] {
                script.push((' ', mid_a[i]));
                i += 1;
                j += 1;
            } else if lcs[(i + 1) * (m + 1) + j] >= lcs[i * (m + 1) + j + 1] {
                script.push(('-', mid_a[i]));
                i += 1;
            } else {
                script.push(('+', mid_b[j]));
                j += 1;
            }
        }
        script.extend(mid_a[i..].iter().map(|l| ('-', *l)));
        script.extend(mid_b[j..].iter().map(|l| ('+', *l)));
    }

    script.extend(a[a.len() - suffix..].iter().map(|l| (' ', *l)));
    script
}
