//! Folds obfuscated string constructions in a decompiled Java source:
//! literal concatenation chains, `new String(new char[]{...})` arrays with
//! masked `(char)(...)` decoders, and constant StringBuilder chains. Runs a
//! dry pass first to show the diff, then applies it.
//!
//! ```text
//! cargo run --example deobfuscate
//! ```

use std::fs;
use std::path::Path;

use malcve::deobfuscator::deobfuscate_dir;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sources/AppletRunnerX.java");
    let dir = tempfile::TempDir::new()?;
    let copy = dir.path().join("AppletRunnerX.java");
    fs::copy(&source, &copy)?;

    println!("dry run:");
    for outcome in deobfuscate_dir(dir.path(), false, true)? {
        if let Some(diff) = &outcome.diff {
            print!("{diff}");
        }
    }

    println!("\napplying:");
    for outcome in deobfuscate_dir(dir.path(), true, false)? {
        println!(
            "  {}: {} folds, changed={}",
            outcome.path.file_name().unwrap().to_string_lossy(),
            outcome.folds,
            outcome.changed
        );
    }

    let folded = fs::read_to_string(&copy)?;
    println!("\nrecovered constants:");
    for needle in [
        "com.sun.beans.finder.ClassFinder",
        "sun.awt.SunToolkit",
        "findClass",
    ] {
        let status = if folded.contains(&format!("\"{needle}\"")) {
            "now a plain literal"
        } else {
            "not found"
        };
        println!("  {needle}: {status}");
    }
    Ok(())
}
