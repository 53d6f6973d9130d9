use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use corpusforge::corpus::{write_records, Document};
use corpusforge::lm::{lm_filter, NGramModel, PerplexityThresholds, Smoothing};
use rayon::prelude::*;
use serde::Serialize;

use crate::util::{emit, read_all, settings};
use crate::Globals;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SmoothingKind {
    KneserNey,
    AddK,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, value_enum, default_value = "kneser-ney")]
    smoothing: SmoothingKind,
    /// Kneser-Ney discount.
    #[arg(long, default_value_t = 0.75)]
    discount: f64,
    /// Add-k constant.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
}

#[derive(Serialize)]
struct TrainReport {
    docs: usize,
    order: usize,
    smoothing: Smoothing,
    vocab: usize,
}

pub fn train(a: TrainArgs, g: &Globals) -> Result<()> {
    let (docs, _) = read_all::<Document>(&a.input)?;
    let smoothing = match a.smoothing {
        SmoothingKind::KneserNey => Smoothing::KneserNey { discount: a.discount },
        SmoothingKind::AddK => Smoothing::AddK { k: a.k },
    };
    let model = NGramModel::train(&docs, a.order, smoothing)?;
    model.save(&a.output)?;
    emit(
        &TrainReport {
            docs: docs.len(),
            order: model.order(),
            smoothing,
            vocab: model.vocab().len(),
        },
        g,
    )
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Serialize)]
struct ScoredLine<'a> {
    #[serde(flatten)]
    doc: &'a Document,
    /// Null when the document has nothing to score.
    perplexity: Option<f64>,
}

#[derive(Serialize)]
struct ScoreReport {
    docs: usize,
    unscorable: usize,
}

pub fn score(a: ScoreArgs, g: &Globals) -> Result<()> {
    let model = NGramModel::load(&a.model)?;
    let (docs, _) = read_all::<Document>(&a.input)?;
    let ppl: Vec<Option<f64>> = docs
        .par_iter()
        .map(|d| model.perplexity(&d.content).ok())
        .collect();
    let lines = docs
        .iter()
        .zip(&ppl)
        .map(|(doc, &perplexity)| ScoredLine { doc, perplexity });
    write_records(lines, &a.output)?;
    emit(
        &ScoreReport {
            docs: docs.len(),
            unscorable: ppl.iter().filter(|p| p.is_none()).count(),
        },
        g,
    )
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Per-source maximum perplexity as SOURCE=VALUE; repeatable.
    #[arg(long = "threshold")]
    thresholds: Vec<String>,
    /// Maximum perplexity for sources without their own threshold.
    #[arg(long)]
    default_threshold: Option<f64>,
}

pub fn filter(a: FilterArgs, g: &Globals) -> Result<()> {
    let mut thresholds: PerplexityThresholds = settings(g)?;
    for t in &a.thresholds {
        let (source, value) = t
            .rsplit_once('=')
            .with_context(|| format!("expected SOURCE=VALUE, got {t:?}"))?;
        let value: f64 = value.parse().with_context(|| format!("bad threshold in {t:?}"))?;
        thresholds.per_source.insert(source.to_string(), value);
    }
    if a.default_threshold.is_some() {
        thresholds.default = a.default_threshold;
    }
    if thresholds.per_source.is_empty() && thresholds.default.is_none() {
        bail!("no perplexity thresholds given");
    }
    thresholds.validate()?;
    let model = NGramModel::load(&a.model)?;
    let (docs, _) = read_all::<Document>(&a.input)?;
    let (kept, report) = lm_filter(docs, &model, &thresholds)?;
    write_records(&kept, &a.output)?;
    emit(&report, g)
}
