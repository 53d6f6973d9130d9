use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use corpusforge::corpus::{read_records, JsonlRecord, LineError};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::Globals;

/// Prints the report as JSON, or writes it to `--report` when given.
pub fn emit<T: Serialize>(report: &T, g: &Globals) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    match &g.report {
        Some(path) => std::fs::write(path, json + "\n")
            .with_context(|| format!("writing report {}", path.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

/// Settings from `--config`, or the type's defaults without one.
pub fn settings<T: DeserializeOwned + Default>(g: &Globals) -> Result<T> {
    match &g.config {
        None => Ok(T::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
        }
    }
}

/// Reads a JSONL file, reporting skipped lines on stderr.
pub fn read_all<T: JsonlRecord>(path: &Path) -> Result<(Vec<T>, Vec<LineError>)> {
    let out = read_records::<T>(path).with_context(|| format!("reading {}", path.display()))?;
    warn_skipped(path, &out.skipped);
    Ok((out.records, out.skipped))
}

pub fn warn_skipped(path: &Path, skipped: &[LineError]) {
    for s in skipped.iter().take(5) {
        eprintln!("warning: {}:{}: {}", path.display(), s.line, s.message);
    }
    if skipped.len() > 5 {
        eprintln!("warning: {} more malformed lines in {}", skipped.len() - 5, path.display());
    }
}

/// Reads a whole file, or stdin for `-`.
pub fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}
