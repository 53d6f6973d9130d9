//! Evaluation metrics: accuracy, MAD, token F1, calibration error, and the
//! weighted aggregate scores used to compare model variants.

mod calibration;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calibration::{ece, BinSummary, CalibrationAccumulator, CalibrationReport};

/// A prediction or gold value: a label, a number, or a set of tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Number(f64),
    Text(String),
    List(Vec<String>),
}

impl Answer {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Answer::Number(x) => Some(*x),
            Answer::Text(s) => s.trim().parse().ok(),
            Answer::List(_) => None,
        }
    }

    /// Token set: list items as given, or text split on commas and whitespace.
    pub fn tokens(&self) -> BTreeSet<String> {
        match self {
            Answer::List(items) => items
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            Answer::Text(s) => s
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect(),
            Answer::Number(x) => [x.to_string()].into(),
        }
    }

    fn label(&self) -> String {
        match self {
            Answer::Number(x) => x.to_string(),
            Answer::Text(s) => s.trim().to_string(),
            Answer::List(items) => {
                let set: BTreeSet<&str> = items.iter().map(|s| s.trim()).collect();
                set.into_iter().collect::<Vec<_>>().join(",")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub predicted: Answer,
    pub gold: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

impl PredictionRecord {
    /// The explicit `correct` flag if present, else an exact label match.
    pub fn is_correct(&self) -> bool {
        self.correct
            .unwrap_or_else(|| self.predicted.label() == self.gold.label())
    }
}

impl crate::corpus::JsonlRecord for PredictionRecord {
    fn check(self) -> Result<Self> {
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::invalid(format!(
                    "record {:?}: confidence {c} outside [0, 1]",
                    self.id
                )));
            }
        }
        Ok(self)
    }
}

fn non_empty(records: &[PredictionRecord], metric: &str) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Empty(format!("{metric} over zero records")));
    }
    Ok(())
}

pub fn accuracy(records: &[PredictionRecord]) -> Result<f64> {
    non_empty(records, "accuracy")?;
    let hits = records.iter().filter(|r| r.is_correct()).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Mean absolute deviation between numeric predictions and gold values.
pub fn mad(records: &[PredictionRecord]) -> Result<f64> {
    non_empty(records, "mad")?;
    let mut total = 0.0;
    for r in records {
        let (p, g) = r
            .predicted
            .as_number()
            .zip(r.gold.as_number())
            .ok_or_else(|| Error::invalid(format!("record {:?} is not numeric", r.id)))?;
        total += (p - g).abs();
    }
    Ok(total / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro-averaged F1 over predicted vs gold token sets. When every set is
/// empty the prediction is perfect by convention.
pub fn token_f1(records: &[PredictionRecord]) -> Result<F1Score> {
    non_empty(records, "token_f1")?;
    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for r in records {
        let p = r.predicted.tokens();
        let g = r.gold.tokens();
        tp += p.intersection(&g).count();
        n_pred += p.len();
        n_gold += g.len();
    }
    if n_pred == 0 && n_gold == 0 {
        return Ok(F1Score {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let precision = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
    let recall = if n_gold == 0 { 0.0 } else { tp as f64 / n_gold as f64 };
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(F1Score {
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Mad,
    F1,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "mad" => Ok(Metric::Mad),
            "f1" => Ok(Metric::F1),
            other => Err(Error::config(format!("unknown metric {other:?}"))),
        }
    }
}

pub fn evaluate(records: &[PredictionRecord], metric: Metric) -> Result<f64> {
    match metric {
        Metric::Accuracy => accuracy(records),
        Metric::Mad => mad(records),
        Metric::F1 => token_f1(records).map(|s| s.f1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScore {
    pub name: String,
    pub value: f64,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: String,
    pub metric: Metric,
}

impl BenchmarkSpec {
    pub fn new(name: &str, metric: Metric) -> Self {
        BenchmarkSpec {
            name: name.into(),
            metric,
        }
    }

    /// Parses `name:metric`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, metric) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::config(format!("expected name:metric, got {s:?}")))?;
        Ok(BenchmarkSpec::new(name.trim(), metric.trim().parse()?))
    }
}

/// The seven security benchmarks of the comparison tables, in column order.
pub fn security_benchmarks() -> Vec<BenchmarkSpec> {
    use Metric::*;
    [
        ("CISSP", Accuracy),
        ("CTI-MCQ", Accuracy),
        ("CTI-RCM", Accuracy),
        ("CTI-VSP", Mad),
        ("CTI-ATE", F1),
        ("CyberMetric", Accuracy),
        ("SecEval", Accuracy),
    ]
    .into_iter()
    .map(|(n, m)| BenchmarkSpec::new(n, m))
    .collect()
}

/// Sum of all benchmark values with deviation-type metrics negated, so
/// that higher is better throughout.
pub fn aggregate_cyber(scores: &[BenchmarkScore], specs: &[BenchmarkSpec]) -> Result<f64> {
    let mut by_name: BTreeMap<&str, &BenchmarkScore> = BTreeMap::new();
    for s in scores {
        if by_name.insert(&s.name, s).is_some() {
            return Err(Error::invalid(format!("duplicate score for benchmark {:?}", s.name)));
        }
    }
    let mut total = 0.0;
    for spec in specs {
        let s = by_name
            .remove(spec.name.as_str())
            .ok_or_else(|| Error::invalid(format!("missing score for benchmark {:?}", spec.name)))?;
        if s.metric != spec.metric {
            return Err(Error::invalid(format!(
                "benchmark {:?} is configured as {:?} but scored as {:?}",
                spec.name, spec.metric, s.metric
            )));
        }
        let valid = match s.metric {
            Metric::Accuracy | Metric::F1 => (0.0..=1.0).contains(&s.value),
            Metric::Mad => s.value >= 0.0 && s.value.is_finite(),
        };
        if !valid {
            return Err(Error::invalid(format!(
                "benchmark {:?}: value {} out of range for {:?}",
                s.name, s.value, s.metric
            )));
        }
        total += match s.metric {
            Metric::Mad => -s.value,
            _ => s.value,
        };
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::invalid(format!("score for unconfigured benchmark {extra:?}")));
    }
    Ok(total)
}

pub fn aggregate_weighted(general: f64, cyber_agg: f64, w_general: f64, w_cyber: f64) -> Result<f64> {
    if (w_general + w_cyber - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "aggregate weights must sum to 1, got {w_general} + {w_cyber}"
        )));
    }
    Ok(w_general * general + w_cyber * cyber_agg)
}

/// Relative change in percent.
pub fn improvement_percent(old: f64, new: f64) -> f64 {
    (new - old) / old * 100.0
}

/// `2.66↑15.9%` style cell: the value to two decimals plus the change
/// against a reference.
pub fn format_with_change(value: f64, reference: f64) -> String {
    let pct = improvement_percent(reference, value);
    let arrow = if pct >= 0.0 { '↑' } else { '↓' };
    format!("{value:.2}{arrow}{:.1}%", pct.abs())
}

pub fn mae_agreement(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("score lists differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Empty("mae over zero scores".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeTable {
    pub per_task: BTreeMap<String, f64>,
    /// Unweighted mean of the per-task values.
    pub average: f64,
}

pub fn mae_table(tasks: &BTreeMap<String, (Vec<f64>, Vec<f64>)>) -> Result<MaeTable> {
    if tasks.is_empty() {
        return Err(Error::Empty("no tasks".into()));
    }
    let per_task = tasks
        .iter()
        .map(|(k, (a, b))| Ok((k.clone(), mae_agreement(a, b)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let average = per_task.values().sum::<f64>() / per_task.len() as f64;
    Ok(MaeTable { per_task, average })
}
