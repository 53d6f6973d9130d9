//! Hashed n-gram logistic relevance classifier and score-bin threshold calibration.

mod calibration;
mod io;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenize::tokenize;

pub use calibration::{
    bin_calibration, default_edges, select_threshold, BinReport, BinStat, Labeler,
};

/// Sparse feature vector: sorted unique indices with their weights.
pub type Features = Vec<(u32, f32)>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub feature_dim: u32,
    /// Longest word n-gram hashed; 1 gives a pure bag of words.
    pub max_ngram: u8,
    pub hash_seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            feature_dim: 1 << 20,
            max_ngram: 2,
            hash_seed: 0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be ≥ 1"));
        }
        if !(1..=4).contains(&self.max_ngram) {
            return Err(Error::config("max_ngram must be in 1..=4"));
        }
        Ok(())
    }

    pub fn feature_index(&self, gram: &str) -> u32 {
        (xxh3_64_with_seed(gram.as_bytes(), self.hash_seed) % self.feature_dim as u64) as u32
    }

    /// L2-normalized hashed term frequencies over 1..=max_ngram word n-grams.
    pub fn features(&self, text: &str) -> Features {
        let tokens = tokenize(text);
        let mut idx = Vec::with_capacity(tokens.len() * self.max_ngram as usize);
        let mut gram = String::new();
        for n in 1..=self.max_ngram as usize {
            for w in tokens.windows(n) {
                gram.clear();
                for (i, t) in w.iter().enumerate() {
                    if i > 0 {
                        gram.push(' ');
                    }
                    gram.push_str(t);
                }
                idx.push(self.feature_index(&gram));
            }
        }
        idx.sort_unstable();
        let mut out: Vec<(u32, f32)> = Vec::new();
        for i in idx {
            match out.last_mut() {
                Some((j, c)) if *j == i => *c += 1.0,
                _ => out.push((i, 1.0)),
            }
        }
        let norm = out.iter().map(|(_, c)| c * c).sum::<f32>().sqrt();
        for (_, c) in &mut out {
            *c /= norm;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub features: FeatureConfig,
    pub weights: Vec<f32>,
    pub bias: f32,
}

/// Keeps scores strictly inside (0, 1) even when the margin saturates f64.
const SCORE_EPS: f64 = 1e-15;

pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

impl LinearClassifier {
    pub fn zeros(features: FeatureConfig) -> Result<Self> {
        features.validate()?;
        Ok(LinearClassifier {
            weights: vec![0.0; features.feature_dim as usize],
            features,
            bias: 0.0,
        })
    }

    pub fn margin_of(&self, x: &Features) -> f64 {
        let dot: f64 = x
            .iter()
            .map(|&(i, v)| self.weights[i as usize] as f64 * v as f64)
            .sum();
        dot + self.bias as f64
    }

    pub fn margin(&self, text: &str) -> f64 {
        self.margin_of(&self.features.features(text))
    }

    pub fn score(&self, text: &str) -> f64 {
        sigmoid(self.margin(text))
    }

    /// Score plus a flag set when the text produced no features, in which
    /// case the score is sigmoid(bias).
    pub fn score_document(&self, doc: &Document) -> ScoredDocument {
        let x = self.features.features(&doc.content);
        ScoredDocument {
            featureless: x.is_empty(),
            score: sigmoid(self.margin_of(&x)),
            doc: doc.clone(),
        }
    }

    pub fn score_documents(&self, docs: Vec<Document>) -> Vec<ScoredDocument> {
        docs.par_iter().map(|d| self.score_document(d)).collect()
    }
}

/// A document with a relevance score, serialized as the document's fields
/// plus `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    #[serde(flatten)]
    pub doc: Document,
    pub score: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub featureless: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDocument {
    #[serde(flatten)]
    pub doc: Document,
    pub label: bool,
}

/// All positives plus a seeded uniform sample of `neg_ratio × |positives|`
/// background documents, shuffled.
pub fn assemble_training_set(
    positives: Vec<Document>,
    background: Vec<Document>,
    neg_ratio: usize,
    seed: u64,
) -> Result<Vec<LabeledDocument>> {
    if neg_ratio == 0 {
        return Err(Error::config("neg_ratio must be ≥ 1"));
    }
    let need = positives.len() * neg_ratio;
    if background.len() < need {
        return Err(Error::invalid(format!(
            "need {need} background documents for {} positives at ratio {neg_ratio}, have {} (short by {})",
            positives.len(),
            background.len(),
            need - background.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, background.len(), need).into_vec();
    picked.sort_unstable();
    let mut background: Vec<Option<Document>> = background.into_iter().map(Some).collect();
    let mut out: Vec<LabeledDocument> = positives
        .into_iter()
        .map(|doc| LabeledDocument { doc, label: true })
        .collect();
    out.extend(picked.into_iter().map(|i| LabeledDocument {
        doc: background[i].take().expect("sample indices are distinct"),
        label: false,
    }));
    out.shuffle(&mut rng);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub features: FeatureConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            lr: 0.5,
            seed: 0,
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub positives: usize,
    pub accuracy: f64,
}

/// Plain per-sample SGD on the logistic loss. Single-threaded over a seeded
/// shuffle so the result is bitwise reproducible.
pub fn train_classifier(
    data: &[LabeledDocument],
    cfg: &TrainConfig,
) -> Result<(LinearClassifier, TrainSummary)> {
    if cfg.epochs == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::config("epochs must be ≥ 1 and lr positive"));
    }
    let positives = data.iter().filter(|d| d.label).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::invalid(
            "training data must contain both positive and negative samples",
        ));
    }
    let mut model = LinearClassifier::zeros(cfg.features)?;
    let xs: Vec<Features> = data
        .par_iter()
        .map(|d| cfg.features.features(&d.doc.content))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let y = if data[i].label { 1.0 } else { 0.0 };
            let g = sigmoid(model.margin_of(&xs[i])) - y;
            let step = cfg.lr * g;
            for &(j, v) in &xs[i] {
                model.weights[j as usize] -= (step * v as f64) as f32;
            }
            model.bias -= step as f32;
        }
    }
    let correct = xs
        .iter()
        .zip(data)
        .filter(|(x, d)| (model.margin_of(x) > 0.0) == d.label)
        .count();
    let summary = TrainSummary {
        samples: data.len(),
        positives,
        accuracy: correct as f64 / data.len() as f64,
    };
    Ok((model, summary))
}

impl crate::corpus::JsonlRecord for ScoredDocument {
    fn check(mut self) -> Result<Self> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::invalid(format!("score {} outside [0, 1]", self.score)));
        }
        self.doc = self.doc.validated()?;
        Ok(self)
    }
}

impl crate::corpus::JsonlRecord for LabeledDocument {
    fn check(mut self) -> Result<Self> {
        self.doc = self.doc.validated()?;
        Ok(self)
    }
}
