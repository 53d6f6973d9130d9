use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use corpusforge::eval::{
    aggregate_cyber, aggregate_weighted, ece, evaluate, format_with_change, improvement_percent,
    security_benchmarks, token_f1, BenchmarkScore, BenchmarkSpec, Metric, PredictionRecord,
};
use serde::{Deserialize, Serialize};

use crate::util::{emit, read_all};
use crate::Globals;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction records (JSONL).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "accuracy")]
    metric: Metric,
}

#[derive(Serialize)]
struct EvalReport {
    metric: Metric,
    records: usize,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<corpusforge::eval::F1Score>,
}

pub fn eval(a: EvalArgs, g: &Globals) -> Result<()> {
    let (records, _) = read_all::<PredictionRecord>(&a.input)?;
    let f1 = match a.metric {
        Metric::F1 => Some(token_f1(&records)?),
        _ => None,
    };
    emit(
        &EvalReport {
            metric: a.metric,
            records: records.len(),
            value: evaluate(&records, a.metric)?,
            f1,
        },
        g,
    )
}

#[derive(Debug, Args)]
pub struct CalibrationArgs {
    /// Prediction records carrying a confidence.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

pub fn calibration(a: CalibrationArgs, g: &Globals) -> Result<()> {
    let (records, _) = read_all::<PredictionRecord>(&a.input)?;
    emit(&ece(&records, a.bins)?, g)
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// JSON scores: a list of {"name", "value", "metric"} or a map of name
    /// to value (metrics then come from the spec).
    #[arg(long)]
    scores: PathBuf,
    /// Benchmarks as NAME:METRIC, comma separated [default: the seven
    /// security benchmarks].
    #[arg(long, value_delimiter = ',')]
    spec: Option<Vec<String>>,
    /// General-domain score to blend with the aggregate.
    #[arg(long)]
    general: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    w_general: f64,
    #[arg(long, default_value_t = 0.5)]
    w_cyber: f64,
    /// Reference aggregate for the relative change.
    #[arg(long)]
    reference: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScoreFile {
    List(Vec<BenchmarkScore>),
    Map(BTreeMap<String, f64>),
}

#[derive(Serialize)]
struct AggregateReport {
    cyber: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    weighted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    change_percent: Option<f64>,
    display: String,
}

pub fn aggregate(a: AggregateArgs, g: &Globals) -> Result<()> {
    let specs = match &a.spec {
        Some(items) => items
            .iter()
            .map(|s| BenchmarkSpec::parse(s))
            .collect::<corpusforge::Result<Vec<_>>>()?,
        None => security_benchmarks(),
    };
    let text = std::fs::read_to_string(&a.scores)
        .with_context(|| format!("reading {}", a.scores.display()))?;
    let scores = match serde_json::from_str::<ScoreFile>(&text)? {
        ScoreFile::List(l) => l,
        ScoreFile::Map(m) => {
            let metric_of: BTreeMap<&str, Metric> =
                specs.iter().map(|s| (s.name.as_str(), s.metric)).collect();
            m.into_iter()
                .map(|(name, value)| match metric_of.get(name.as_str()) {
                    Some(&metric) => Ok(BenchmarkScore { name, value, metric }),
                    None => bail!("score for unconfigured benchmark {name:?}"),
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let cyber = aggregate_cyber(&scores, &specs)?;
    let weighted = a
        .general
        .map(|gen| aggregate_weighted(gen, cyber, a.w_general, a.w_cyber))
        .transpose()?;
    let display = match a.reference {
        Some(r) => format_with_change(cyber, r),
        None => format!("{cyber:.2}"),
    };
    emit(
        &AggregateReport {
            cyber,
            weighted,
            change_percent: a.reference.map(|r| improvement_percent(r, cyber)),
            display,
        },
        g,
    )
}
