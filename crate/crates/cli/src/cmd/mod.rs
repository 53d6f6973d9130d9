mod classify;
mod corpus;
mod curate;
mod dedup;
mod eval;
mod lm;
mod merge;

use anyhow::Result;
use clap::Subcommand;

use crate::Globals;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalize a JSONL corpus, optionally converting HTML content.
    Ingest(corpus::IngestArgs),
    /// Convert an HTML file to Markdown.
    Html2md(corpus::Html2mdArgs),
    /// Expand a category graph from its root with an allowlist or a model.
    ExpandCategories(corpus::ExpandArgs),
    /// Apply a rule-based filter to a corpus.
    Filter(corpus::FilterArgs),
    /// Train an n-gram language model.
    LmTrain(lm::TrainArgs),
    /// Add a perplexity field to every document.
    LmScore(lm::ScoreArgs),
    /// Drop documents above their source's perplexity threshold.
    LmFilter(lm::FilterArgs),
    /// Remove near-duplicates with MinHash-LSH.
    Dedup(dedup::DedupArgs),
    /// Drop documents sharing an n-gram with an evaluation set.
    Decontaminate(dedup::DecontamArgs),
    /// Train the relevance classifier from positives and background text.
    ClassifyTrain(classify::TrainArgs),
    /// Score a corpus with a trained classifier.
    ClassifyScore(classify::ScoreArgs),
    /// Sample and label documents per score bin.
    Calibrate(classify::CalibrateArgs),
    /// Pick a score threshold from a calibration report.
    SelectThreshold(classify::SelectArgs),
    /// Rewrite documents through completion services.
    Augment(curate::AugmentArgs),
    /// Keep the best judged chat samples per task.
    JudgeFilter(curate::JudgeArgs),
    /// Keep chat samples whose final answer matches the key.
    RejectSample(curate::RejectArgs),
    /// Merge fine-tuned checkpoints onto a base with DARE-TIES.
    Merge(merge::MergeArgs),
    /// Search the mixing ratio of two checkpoints with an external scorer.
    GridSearch(merge::GridArgs),
    /// Score prediction records with a metric.
    Eval(eval::EvalArgs),
    /// Expected calibration error of prediction records.
    Calibration(eval::CalibrationArgs),
    /// Combine benchmark scores into aggregate numbers.
    Aggregate(eval::AggregateArgs),
    /// Sample and token counts, overall and per source.
    Stats(corpus::StatsArgs),
    /// Run a configured multi-stage pipeline.
    Pipeline(corpus::PipelineArgs),
}

pub fn run(command: Command, g: &Globals) -> Result<()> {
    match command {
        Command::Ingest(a) => corpus::ingest(a, g),
        Command::Html2md(a) => corpus::html2md(a),
        Command::ExpandCategories(a) => corpus::expand(a, g),
        Command::Filter(a) => corpus::filter(a, g),
        Command::LmTrain(a) => lm::train(a, g),
        Command::LmScore(a) => lm::score(a, g),
        Command::LmFilter(a) => lm::filter(a, g),
        Command::Dedup(a) => dedup::dedup(a, g),
        Command::Decontaminate(a) => dedup::decontaminate(a, g),
        Command::ClassifyTrain(a) => classify::train(a, g),
        Command::ClassifyScore(a) => classify::score(a, g),
        Command::Calibrate(a) => classify::calibrate(a, g),
        Command::SelectThreshold(a) => classify::select(a, g),
        Command::Augment(a) => curate::augment(a, g),
        Command::JudgeFilter(a) => curate::judge(a, g),
        Command::RejectSample(a) => curate::reject(a, g),
        Command::Merge(a) => merge::merge(a, g),
        Command::GridSearch(a) => merge::grid(a, g),
        Command::Eval(a) => eval::eval(a, g),
        Command::Calibration(a) => eval::calibration(a, g),
        Command::Aggregate(a) => eval::aggregate(a, g),
        Command::Stats(a) => corpus::stats(a, g),
        Command::Pipeline(a) => corpus::pipeline(a, g),
    }
}

/// Completion service flags shared by the model-backed subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct ServiceArgs {
    /// Chat-completions URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding a bearer token.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
}

impl ServiceArgs {
    pub fn client(&self) -> Result<Option<corpusforge::curation::CompletionClient>> {
        use corpusforge::curation::{ClientConfig, CompletionClient};
        match (&self.endpoint, &self.model) {
            (None, None) => Ok(None),
            (Some(endpoint), Some(model)) => {
                let mut cfg = ClientConfig::new(endpoint.clone(), model.clone());
                cfg.api_key_env = self.api_key_env.clone();
                if let Some(t) = self.timeout_secs {
                    cfg.timeout_secs = t;
                }
                Ok(Some(CompletionClient::new(cfg)?))
            }
            _ => anyhow::bail!("--endpoint and --model must be given together"),
        }
    }
}
