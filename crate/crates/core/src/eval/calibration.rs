use serde::{Deserialize, Serialize};

use super::PredictionRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub low: f64,
    pub high: f64,
    pub count: u64,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub num_bins: usize,
    pub total: u64,
    pub per_bin: Vec<BinSummary>,
    pub ece: f64,
}

/// Per-bin (count, Σ confidence, Σ correct). Accumulators over disjoint
/// record sets merge exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationAccumulator {
    count: Vec<u64>,
    conf_sum: Vec<f64>,
    correct: Vec<u64>,
}

impl CalibrationAccumulator {
    pub fn new(num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(Error::config("num_bins must be ≥ 1"));
        }
        Ok(CalibrationAccumulator {
            count: vec![0; num_bins],
            conf_sum: vec![0.0; num_bins],
            correct: vec![0; num_bins],
        })
    }

    pub fn num_bins(&self) -> usize {
        self.count.len()
    }

    fn edge(&self, b: usize) -> f64 {
        b as f64 / self.num_bins() as f64
    }

    /// Bin b covers [b/n, (b+1)/n); the last bin also takes 1.0. The edges
    /// are the same f64 values the report prints, so a confidence equal to an
    /// edge always lands in the bin starting there.
    pub fn bin_of(&self, confidence: f64) -> usize {
        let n = self.num_bins();
        let mut b = ((confidence * n as f64).floor() as usize).min(n - 1);
        if b > 0 && confidence < self.edge(b) {
            b -= 1;
        } else if b + 1 < n && confidence >= self.edge(b + 1) {
            b += 1;
        }
        b
    }

    pub fn add(&mut self, confidence: f64, correct: bool) -> Result<()> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!("confidence {confidence} outside [0, 1]")));
        }
        let b = self.bin_of(confidence);
        self.count[b] += 1;
        self.conf_sum[b] += confidence;
        self.correct[b] += correct as u64;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.num_bins() != self.num_bins() {
            return Err(Error::Shape("cannot merge accumulators with different bin counts".into()));
        }
        for b in 0..self.num_bins() {
            self.count[b] += other.count[b];
            self.conf_sum[b] += other.conf_sum[b];
            self.correct[b] += other.correct[b];
        }
        Ok(())
    }

    pub fn report(&self) -> Result<CalibrationReport> {
        let total: u64 = self.count.iter().sum();
        if total == 0 {
            return Err(Error::Empty("calibration over zero records".into()));
        }
        let mut ece = 0.0;
        let per_bin = (0..self.num_bins())
            .map(|b| {
                let n = self.count[b];
                let (mean_confidence, accuracy) = if n == 0 {
                    (None, None)
                } else {
                    let conf = self.conf_sum[b] / n as f64;
                    let acc = self.correct[b] as f64 / n as f64;
                    ece += n as f64 / total as f64 * (acc - conf).abs();
                    (Some(conf), Some(acc))
                };
                BinSummary {
                    low: self.edge(b),
                    high: self.edge(b + 1),
                    count: n,
                    mean_confidence,
                    accuracy,
                }
            })
            .collect();
        Ok(CalibrationReport {
            num_bins: self.num_bins(),
            total,
            per_bin,
            ece,
        })
    }
}

/// Expected calibration error over records carrying a confidence.
pub fn ece(records: &[PredictionRecord], num_bins: usize) -> Result<CalibrationReport> {
    let mut acc = CalibrationAccumulator::new(num_bins)?;
    for r in records {
        let c = r
            .confidence
            .ok_or_else(|| Error::invalid(format!("record {:?} has no confidence", r.id)))?;
        acc.add(c, r.is_correct())
            .map_err(|e| Error::invalid(format!("record {:?}: {e}", r.id)))?;
    }
    acc.report()
}
