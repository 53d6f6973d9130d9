use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use corpusforge::classifier::{
    assemble_training_set, bin_calibration, default_edges, select_threshold, train_classifier,
    BinReport, LinearClassifier, ScoredDocument, TrainConfig,
};
use corpusforge::corpus::{write_records, Document};
use corpusforge::curation::{builtin_relevance_template, CompletionLabeler, Template};
use serde::{Deserialize, Serialize};

use super::ServiceArgs;
use crate::util::{emit, read_all, settings};
use crate::Globals;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// On-topic documents.
    #[arg(long)]
    positives: PathBuf,
    /// General documents sampled as negatives.
    #[arg(long)]
    background: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Negatives drawn per positive.
    #[arg(long, default_value_t = 10)]
    neg_ratio: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

pub fn train(a: TrainArgs, g: &Globals) -> Result<()> {
    let mut cfg: TrainConfig = settings(g)?;
    cfg.seed = g.seed;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    let (pos, _) = read_all::<Document>(&a.positives)?;
    let (bg, _) = read_all::<Document>(&a.background)?;
    let data = assemble_training_set(pos, bg, a.neg_ratio, g.seed)?;
    let (model, summary) = train_classifier(&data, &cfg)?;
    model.save(&a.output)?;
    emit(&summary, g)
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
struct ScoreReport {
    docs: usize,
    featureless: usize,
}

pub fn score(a: ScoreArgs, g: &Globals) -> Result<()> {
    let model = LinearClassifier::load(&a.model)?;
    let (docs, _) = read_all::<Document>(&a.input)?;
    let scored = model.score_documents(docs);
    write_records(&scored, &a.output)?;
    emit(
        &ScoreReport {
            docs: scored.len(),
            featureless: scored.iter().filter(|s| s.featureless).count(),
        },
        g,
    )
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Scored corpus from classify-score.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 50)]
    sample_per_bin: usize,
    /// Bin edges from 1 down to 0, comma separated.
    #[arg(long, value_delimiter = ',')]
    edges: Option<Vec<f64>>,
    /// JSONL of {"url": .., "label": true|false} used as the labeler.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Also pick a threshold at this minimum relevant ratio.
    #[arg(long)]
    min_ratio: Option<f64>,
    /// Relevance prompt with a {TEXT} slot, for the model labeler.
    #[arg(long)]
    template: Option<PathBuf>,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Deserialize)]
struct UrlLabel {
    url: String,
    label: bool,
}

impl corpusforge::corpus::JsonlRecord for UrlLabel {}

struct TableLabeler(HashMap<String, bool>);

impl corpusforge::classifier::Labeler for TableLabeler {
    fn label(&self, doc: &Document) -> corpusforge::Result<bool> {
        self.0.get(&doc.url).copied().ok_or_else(|| {
            corpusforge::Error::InvalidInput(format!("no label for sampled document {}", doc.url))
        })
    }
}

pub fn calibrate(a: CalibrateArgs, g: &Globals) -> Result<()> {
    let edges = a.edges.clone().unwrap_or_else(default_edges);
    let (scored, _) = read_all::<ScoredDocument>(&a.input)?;
    let mut report = match (&a.labels, a.service.client()?) {
        (Some(path), None) => {
            let (rows, _) = read_all::<UrlLabel>(path)?;
            let table = TableLabeler(rows.into_iter().map(|r| (r.url, r.label)).collect());
            bin_calibration(scored, &edges, a.sample_per_bin, &table, g.seed)?
        }
        (None, Some(client)) => {
            let template = match &a.template {
                Some(p) => Template::load(p)?,
                None => builtin_relevance_template(),
            };
            let labeler = CompletionLabeler {
                completer: &client,
                template,
            };
            bin_calibration(scored, &edges, a.sample_per_bin, &labeler, g.seed)?
        }
        (Some(_), Some(_)) => bail!("use either --labels or a model endpoint, not both"),
        (None, None) => bail!("give --labels or a model endpoint to label samples"),
    };
    if let Some(r) = a.min_ratio {
        report.threshold_selected = Some(select_threshold(&report, r)?);
    }
    emit(&report, g)
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Report written by calibrate.
    #[arg(long)]
    bins: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    min_ratio: f64,
}

pub fn select(a: SelectArgs, g: &Globals) -> Result<()> {
    let text = std::fs::read_to_string(&a.bins)
        .with_context(|| format!("reading {}", a.bins.display()))?;
    let mut report: BinReport = serde_json::from_str(&text)?;
    report.threshold_selected = Some(select_threshold(&report, a.min_ratio)?);
    emit(&report, g)
}
