use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use corpusforge::corpus::{
    expand_categories, html_to_markdown, write_jsonl, write_records, CategoryGraph, Document,
    LineError,
};
use corpusforge::curation::{builtin_relevance_template, CompletionLabeler, Template};
use corpusforge::filters::{
    c4_verdict, heuristic_verdict, rule, window_filter, FilterConfig, FilterReport, Verdict,
};
use corpusforge::pipeline::{self, PipelineConfig, PipelineDoc};
use rayon::prelude::*;
use serde::Serialize;

use super::ServiceArgs;
use crate::util::{emit, read_all, read_text, settings};
use crate::Globals;

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Treat `content` as HTML and convert it to Markdown.
    #[arg(long)]
    html: bool,
}

#[derive(Serialize)]
struct IngestReport {
    read: usize,
    written: usize,
    /// Documents whose converted content came out empty.
    empty_after_conversion: usize,
    skipped_lines: Vec<LineError>,
}

pub fn ingest(a: IngestArgs, g: &Globals) -> Result<()> {
    let (docs, skipped) = read_all::<Document>(&a.input)?;
    let read = docs.len();
    let docs: Vec<Document> = if a.html {
        docs.into_par_iter()
            .map(|d| Document {
                content: html_to_markdown(&d.content),
                ..d
            })
            .filter(|d| !d.content.trim().is_empty())
            .collect()
    } else {
        docs
    };
    let written = write_jsonl(&docs, &a.output)?;
    emit(
        &IngestReport {
            read,
            written,
            empty_after_conversion: read - written,
            skipped_lines: skipped,
        },
        g,
    )
}

#[derive(Debug, Args)]
pub struct Html2mdArgs {
    /// HTML file, or `-` for stdin.
    #[arg(default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn html2md(a: Html2mdArgs) -> Result<()> {
    let md = html_to_markdown(&read_text(&a.input)?);
    match a.output {
        Some(p) => std::fs::write(&p, md + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{md}");
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    /// JSON file {"root": .., "edges": {parent: [children]}}.
    #[arg(long)]
    graph: PathBuf,
    /// Category to accept; repeatable.
    #[arg(long)]
    allow: Vec<String>,
    /// File with one accepted category per line.
    #[arg(long)]
    allow_file: Option<PathBuf>,
    /// Relevance prompt with a {TEXT} slot, for the model predicate.
    #[arg(long)]
    template: Option<PathBuf>,
    #[command(flatten)]
    service: ServiceArgs,
}

pub fn expand(a: ExpandArgs, g: &Globals) -> Result<()> {
    let graph = CategoryGraph::load(&a.graph)?;
    let mut allow: BTreeSet<String> = a.allow.into_iter().collect();
    if let Some(p) = &a.allow_file {
        allow.extend(
            read_text(p)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from),
        );
    }
    let accepted = match a.service.client()? {
        Some(client) => {
            if !allow.is_empty() {
                bail!("use either an allowlist or a model, not both");
            }
            let template = match &a.template {
                Some(p) => Template::load(p)?,
                None => builtin_relevance_template(),
            };
            let labeler = CompletionLabeler {
                completer: &client,
                template,
            };
            let mut failure = None;
            let accepted = expand_categories(&graph, |c| match labeler.ask(c) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    false
                }
            })?;
            if let Some(e) = failure {
                return Err(e).context("category predicate failed");
            }
            accepted
        }
        None => {
            if allow.is_empty() {
                bail!("give --allow, --allow-file or a model endpoint");
            }
            expand_categories(&graph, |c| allow.contains(c))?
        }
    };
    emit(&accepted, g)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterKind {
    C4,
    Heuristic,
    Window,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "c4")]
    kind: FilterKind,
    #[arg(long)]
    min_words: Option<usize>,
    #[arg(long)]
    min_chars: Option<usize>,
    /// Score window as LOW,HIGH (window filter only).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Option<Vec<f64>>,
}

pub fn filter(a: FilterArgs, g: &Globals) -> Result<()> {
    let mut cfg: FilterConfig = settings(g)?;
    if let Some(n) = a.min_words {
        cfg.min_doc_words = n;
    }
    if let Some(n) = a.min_chars {
        cfg.min_doc_chars = n;
    }
    if let Some(w) = &a.window {
        cfg.score_window = Some((w[0], w[1]));
    }
    cfg.validate()?;
    let (docs, _) = read_all::<PipelineDoc>(&a.input)?;
    if matches!(a.kind, FilterKind::Window) {
        if let Some(d) = docs.iter().find(|d| d.score.is_none()) {
            bail!("document {} has no score field", d.doc.url);
        }
    }
    let verdicts: Vec<Verdict> = docs
        .par_iter()
        .map(|d| match a.kind {
            FilterKind::C4 => c4_verdict(&d.doc, &cfg),
            FilterKind::Heuristic => heuristic_verdict(&d.doc, &cfg),
            FilterKind::Window => {
                let score = d.score.unwrap_or_default();
                if window_filter(score, d.doc.content.chars().count(), &cfg) {
                    Verdict::Keep {
                        doc: d.doc.clone(),
                        lines_dropped: Default::default(),
                    }
                } else {
                    Verdict::Drop(rule::WINDOW)
                }
            }
        })
        .collect();
    let mut report = FilterReport::default();
    let mut out = Vec::new();
    for (v, d) in verdicts.into_iter().zip(&docs) {
        report.record(&v);
        if let Some(doc) = v.into_doc() {
            out.push(PipelineDoc { doc, score: d.score });
        }
    }
    write_records(&out, &a.output)?;
    emit(&report, g)
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
}

pub fn stats(a: StatsArgs, g: &Globals) -> Result<()> {
    let (docs, _) = read_all::<Document>(&a.input)?;
    emit(&pipeline::stats(&docs), g)
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Validate the config and stop.
    #[arg(long)]
    check: bool,
}

pub fn pipeline(a: PipelineArgs, g: &Globals) -> Result<()> {
    let path = g
        .config
        .as_ref()
        .context("pipeline needs --config pointing at a pipeline TOML file")?;
    let cfg = PipelineConfig::load(path)?;
    cfg.validate()?;
    if a.check {
        eprintln!("config ok: {} stages", cfg.stages.len());
        return Ok(());
    }
    let report = pipeline::run(&cfg)?;
    for s in &report.stages {
        eprintln!("{:<20} {:>10} -> {:>10}", s.name, s.docs_in, s.docs_out);
    }
    if let Some(p) = &g.report {
        std::fs::copy(&cfg.io.report, p).with_context(|| format!("copying report to {}", p.display()))?;
    }
    Ok(())
}
