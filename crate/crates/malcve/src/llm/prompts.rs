//! Prompt templates for the three model calls.
//!
//! Templates are plain text files with `{files}`, `{summary}`, `{cves}`, and
//! `{code}` placeholders. The stock set ships inside the binary; a directory
//! of overrides can replace any subset of them. Every loaded template is
//! hashed so reports can record exactly which prompt text produced them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cve_kb::sha256_hex;
use crate::llm::types::SourceUnit;

pub const SUMMARIZE_PROMPT_FILE: &str = "summarize.txt";
pub const QUERIES_PROMPT_FILE: &str = "queries.txt";
pub const PREDICT_PROMPT_FILE: &str = "predict.txt";

const BUILTIN_SUMMARIZE: &str = include_str!("../../prompts/summarize.txt");
const BUILTIN_QUERIES: &str = include_str!("../../prompts/queries.txt");
const BUILTIN_PREDICT: &str = include_str!("../../prompts/predict.txt");

/// SHA-256 of each template's exact text, recorded in report metadata.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PromptHashes {
    pub summarize_sha256: String,
    pub queries_sha256: String,
    pub predict_sha256: String,
}

#[derive(Debug, Clone)]
pub struct PromptSet {
    summarize: String,
    queries: String,
    predict: String,
}

impl PromptSet {
    /// The templates compiled into the binary.
    pub fn builtin() -> Self {
        Self {
            summarize: BUILTIN_SUMMARIZE.to_string(),
            queries: BUILTIN_QUERIES.to_string(),
            predict: BUILTIN_PREDICT.to_string(),
        }
    }

    /// Loads templates from a directory; any missing file keeps its builtin
    /// text, so an override directory only needs the templates it changes.
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::builtin();
        for (file, slot) in [
            (SUMMARIZE_PROMPT_FILE, &mut set.summarize),
            (QUERIES_PROMPT_FILE, &mut set.queries),
            (PREDICT_PROMPT_FILE, &mut set.predict),
        ] {
            let path = dir.join(file);
            match fs::read_to_string(&path) {
                Ok(text) => *slot = text,
                Err(err) if err.kind() == std::io::ErrorKind::NotFound => {}
                Err(err) => return Err(err),
            }
        }
        Ok(set)
    }

    pub fn hashes(&self) -> PromptHashes {
        PromptHashes {
            summarize_sha256: sha256_hex(self.summarize.as_bytes()),
            queries_sha256: sha256_hex(self.queries.as_bytes()),
            predict_sha256: sha256_hex(self.predict.as_bytes()),
        }
    }

    pub fn render_summarize(&self, sources: &[SourceUnit]) -> String {
        self.summarize.replace("{files}", &files_block(sources))
    }

    pub fn render_queries(&self, summary_json: &str) -> String {
        self.queries.replace("{summary}", summary_json)
    }

    pub fn render_predict(&self, summary_json: &str, cves: &str, code: &str) -> String {
        self.predict
            .replace("{summary}", summary_json)
            .replace("{cves}", cves)
            .replace("{code}", code)
    }
}

/// One numbered block per source file.
pub fn files_block(sources: &[SourceUnit]) -> String {
    let mut out = String::new();
    for (i, source) in sources.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!(
            "File {}: {}\n{}",
            i + 1,
            source.name,
            source.content
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn builtin_templates_carry_their_placeholders() {
        let set = PromptSet::builtin();
        assert!(set.summarize.contains("{files}"));
        assert!(set.queries.contains("{summary}"));
        assert!(set.predict.contains("{summary}"));
        assert!(set.predict.contains("{cves}"));
        assert!(set.predict.contains("{code}"));
    }

    #[test]
    fn hashes_are_hex_sha256() {
        let hashes = PromptSet::builtin().hashes();
        for h in [
            &hashes.summarize_sha256,
            &hashes.queries_sha256,
            &hashes.predict_sha256,
        ] {
            assert_eq!(h.len(), 64);
            assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
        }
        assert_ne!(hashes.summarize_sha256, hashes.queries_sha256);
    }

    #[test]
    fn render_summarize_numbers_files() {
        let set = PromptSet::builtin();
        let sources = vec![
            SourceUnit::new("A.java", "class A {}"),
            SourceUnit::new("B.java", "class B {}"),
        ];
        let prompt = set.render_summarize(&sources);
        assert!(prompt.contains("File 1: A.java\nclass A {}"));
        assert!(prompt.contains("File 2: B.java\nclass B {}"));
        assert!(!prompt.contains("{files}"));
    }

    #[test]
    fn render_predict_substitutes_all_placeholders() {
        let set = PromptSet::builtin();
        let prompt = set.render_predict("SUMMARY_JSON", "- CVE-2012-4681: desc", "class X {}");
        assert!(prompt.contains("SUMMARY_JSON"));
        assert!(prompt.contains("- CVE-2012-4681: desc"));
        assert!(prompt.contains("class X {}"));
        for placeholder in ["{summary}", "{cves}", "{code}"] {
            assert!(!prompt.contains(placeholder));
        }
    }

    #[test]
    fn override_directory_replaces_only_present_files() {
        let tmp = TempDir::new().unwrap();
        fs::write(tmp.path().join(QUERIES_PROMPT_FILE), "custom {summary}").unwrap();

        let set = PromptSet::load(tmp.path()).unwrap();
        let builtin = PromptSet::builtin().hashes();
        let loaded = set.hashes();
        assert_eq!(loaded.summarize_sha256, builtin.summarize_sha256);
        assert_eq!(loaded.predict_sha256, builtin.predict_sha256);
        assert_ne!(loaded.queries_sha256, builtin.queries_sha256);
        assert_eq!(set.render_queries("S"), "custom S");
    }
}
