use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScoredDocument;
use crate::corpus::Document;
use crate::dedup::mix64;
use crate::error::{Error, Result};

/// Relevance oracle applied to sampled documents.
pub trait Labeler: Sync {
    fn label(&self, doc: &Document) -> Result<bool>;
}

impl<F> Labeler for F
where
    F: Fn(&Document) -> bool + Sync,
{
    fn label(&self, doc: &Document) -> Result<bool> {
        Ok(self(doc))
    }
}

/// Descending edges, densest near zero.
pub fn default_edges() -> Vec<f64> {
    vec![
        1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.03, 0.01, 0.005, 0.003, 0.001,
        0.0,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub low: f64,
    pub high: f64,
    pub population: usize,
    pub sampled: usize,
    pub relevant: usize,
    /// `None` when the bin holds no documents.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    /// Highest bin first.
    pub bins: Vec<BinStat>,
    #[serde(default)]
    pub threshold_selected: Option<f64>,
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 || edges[0] != 1.0 || *edges.last().unwrap() != 0.0 {
        return Err(Error::config("bin edges must run from 1 down to 0"));
    }
    if edges.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::config("bin edges must be strictly decreasing"));
    }
    Ok(())
}

/// Index of the bin (low, high] holding `score`; the lowest bin also takes 0.
fn bin_of(edges: &[f64], score: f64) -> usize {
    // first edge strictly below the score closes the bin above it
    let k = edges.partition_point(|&e| e >= score);
    k.clamp(1, edges.len() - 1) - 1
}

/// Reservoir-samples up to `sample_per_bin` documents per score bin and
/// labels them. Sampling depends only on the seed and input order.
pub fn bin_calibration<I, L>(
    scored: I,
    edges: &[f64],
    sample_per_bin: usize,
    labeler: &L,
    seed: u64,
) -> Result<BinReport>
where
    I: IntoIterator<Item = ScoredDocument>,
    L: Labeler + ?Sized,
{
    validate_edges(edges)?;
    if sample_per_bin == 0 {
        return Err(Error::config("sample_per_bin must be ≥ 1"));
    }
    let n_bins = edges.len() - 1;
    let mut rngs: Vec<ChaCha8Rng> = (0..n_bins)
        .map(|b| ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(b as u64 + 1))))
        .collect();
    let mut population = vec![0usize; n_bins];
    let mut reservoirs: Vec<Vec<Document>> = vec![Vec::new(); n_bins];
    for s in scored {
        if !(0.0..=1.0).contains(&s.score) {
            return Err(Error::invalid(format!("score {} outside [0, 1]", s.score)));
        }
        let b = bin_of(edges, s.score);
        population[b] += 1;
        let seen = population[b];
        if seen <= sample_per_bin {
            reservoirs[b].push(s.doc);
        } else {
            let j = rngs[b].gen_range(0..seen);
            if j < sample_per_bin {
                reservoirs[b][j] = s.doc;
            }
        }
    }
    let mut bins = Vec::with_capacity(n_bins);
    for (b, sample) in reservoirs.iter().enumerate() {
        let labels: Vec<bool> = sample
            .par_iter()
            .map(|d| labeler.label(d))
            .collect::<Result<_>>()?;
        let relevant = labels.iter().filter(|&&l| l).count();
        bins.push(BinStat {
            low: edges[b + 1],
            high: edges[b],
            population: population[b],
            sampled: sample.len(),
            relevant,
            ratio: (!sample.is_empty()).then(|| relevant as f64 / sample.len() as f64),
        });
    }
    Ok(BinReport {
        bins,
        threshold_selected: None,
    })
}

/// Walks bins from the top and returns the lowest lower edge above which every
/// populated bin reaches `min_ratio`. Empty bins neither pass nor fail.
pub fn select_threshold(report: &BinReport, min_ratio: f64) -> Result<f64> {
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::config("min_ratio must be in (0, 1)"));
    }
    if report.bins.windows(2).any(|w| w[0].low != w[1].high) {
        return Err(Error::invalid("bins must be contiguous and ordered high to low"));
    }
    let mut threshold = None;
    for bin in &report.bins {
        match bin.ratio {
            Some(r) if r >= min_ratio => threshold = Some(bin.low),
            Some(_) => break,
            None if threshold.is_some() => threshold = Some(bin.low),
            None => {}
        }
    }
    threshold.ok_or_else(|| {
        Error::invalid(format!(
            "no score bin reaches a relevance ratio of {min_ratio}"
        ))
    })
}
