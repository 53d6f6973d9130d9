use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use corpusforge::corpus::{write_jsonl, Document};
use corpusforge::dedup::{
    cluster_documents, contaminated, deduplicate, ngram_overlap, sign_documents, write_signatures, DedupScope,
    LshConfig, OverlapMatch,
};
use serde::Serialize;
use serde_json::Value;

use crate::util::{emit, read_all, settings};
use crate::Globals;

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Words per shingle [default: 5].
    #[arg(long)]
    shingle: Option<usize>,
    /// Hash functions per signature [default: 112].
    #[arg(long)]
    hashes: Option<usize>,
    /// LSH bands; rows per band is hashes / bands [default: 14].
    #[arg(long)]
    bands: Option<usize>,
    /// Only documents with the same source label can be duplicates.
    #[arg(long)]
    per_source: bool,
    /// Also write the MinHash signatures to this file.
    #[arg(long)]
    signatures: Option<PathBuf>,
}

pub fn dedup(a: DedupArgs, g: &Globals) -> Result<()> {
    let mut cfg: LshConfig = settings(g)?;
    cfg.seed = g.seed;
    if let Some(n) = a.shingle {
        cfg.shingle_size = n;
    }
    if let Some(n) = a.hashes {
        cfg.num_hashes = n;
    }
    if let Some(n) = a.bands {
        cfg.num_bands = n;
    }
    if a.hashes.is_some() || a.bands.is_some() {
        cfg.rows_per_band = cfg.num_hashes / cfg.num_bands.max(1);
    }
    cfg.validate()?;
    let scope = if a.per_source {
        DedupScope::PerSource
    } else {
        DedupScope::Global
    };
    let (docs, _) = read_all::<Document>(&a.input)?;
    if let Some(p) = &a.signatures {
        let sigs = sign_documents(&docs, &cfg)?;
        let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_signatures(BufWriter::new(f), &cfg, &sigs)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let mut clusters = cluster_documents(&docs, &cfg, scope)?;
    let (kept, report) = deduplicate(docs, &mut clusters);
    write_jsonl(&kept, &a.output)?;
    emit(&report, g)
}

#[derive(Debug, Args)]
pub struct DecontamArgs {
    /// Training corpus to clean.
    #[arg(long)]
    input: PathBuf,
    /// Evaluation set: documents or chat samples.
    #[arg(long)]
    against: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 13)]
    ngram: usize,
    /// Matches listed in the report.
    #[arg(long, default_value_t = 100)]
    max_matches: usize,
}

#[derive(Serialize)]
struct DecontamReport {
    n: usize,
    docs_in: usize,
    docs_out: usize,
    shared_ngrams: usize,
    contaminated: Vec<String>,
    matches: Vec<OverlapMatch>,
}

/// Text of an evaluation record: `content` for documents, otherwise the
/// prompt and every message.
fn record_text(v: &Value) -> String {
    if let Some(s) = v.get("content").and_then(Value::as_str) {
        return s.to_string();
    }
    let mut parts = Vec::new();
    if let Some(s) = v.get("prompt").and_then(Value::as_str) {
        parts.push(s.to_string());
    }
    if let Some(msgs) = v.get("messages").and_then(Value::as_array) {
        parts.extend(
            msgs.iter()
                .filter_map(|m| m.get("content").and_then(Value::as_str))
                .map(String::from),
        );
    }
    parts.join("\n")
}

pub fn decontaminate(a: DecontamArgs, g: &Globals) -> Result<()> {
    let (docs, _) = read_all::<Document>(&a.input)?;
    let (evals, _) = read_all::<Value>(&a.against)?;
    let eval_texts: Vec<String> = evals.iter().map(record_text).collect();
    let texts: Vec<&str> = docs.iter().map(|d| d.content.as_str()).collect();
    let eval_refs: Vec<&str> = eval_texts.iter().map(String::as_str).collect();
    let overlap = ngram_overlap(&texts, &eval_refs, a.ngram);
    let mut bad = vec![false; docs.len()];
    for i in contaminated(&texts, &eval_refs, a.ngram) {
        bad[i] = true;
    }
    let docs_in = docs.len();
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (d, b) in docs.into_iter().zip(bad) {
        if b {
            dropped.push(d.url);
        } else {
            kept.push(d);
        }
    }
    write_jsonl(&kept, &a.output)?;
    emit(
        &DecontamReport {
            n: overlap.n,
            docs_in,
            docs_out: kept.len(),
            shared_ngrams: overlap.count,
            contaminated: dropped,
            matches: overlap.matches.into_iter().take(a.max_matches).collect(),
        },
        g,
    )
}
