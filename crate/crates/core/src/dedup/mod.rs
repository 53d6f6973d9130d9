//! Near-duplicate removal with MinHash-LSH and exact n-gram decontamination.

mod decontam;
mod lsh;
mod minhash;
mod signature_io;
mod union_find;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenize::whitespace_tokens;

pub use decontam::{contaminated, ngram_overlap, OverlapMatch, OverlapReport};
pub use lsh::{detection_probability, find_duplicates};
pub(crate) use minhash::mix64;
pub use minhash::{shingles, signature, MinHasher, MinHashSignature};
pub use signature_io::{read_signatures, write_signatures};
pub use union_find::ClusterSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LshConfig {
    /// Words per shingle.
    pub shingle_size: usize,
    pub num_hashes: usize,
    pub num_bands: usize,
    pub rows_per_band: usize,
    pub seed: u64,
}

impl Default for LshConfig {
    fn default() -> Self {
        LshConfig {
            shingle_size: 5,
            num_hashes: 112,
            num_bands: 14,
            rows_per_band: 8,
            seed: 0,
        }
    }
}

impl LshConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_size == 0 {
            return Err(Error::config("shingle_size must be ≥ 1"));
        }
        if self.num_bands == 0 || self.rows_per_band == 0 {
            return Err(Error::config("num_bands and rows_per_band must be ≥ 1"));
        }
        if self.num_bands * self.rows_per_band != self.num_hashes {
            return Err(Error::config(format!(
                "num_bands ({}) × rows_per_band ({}) must equal num_hashes ({})",
                self.num_bands, self.rows_per_band, self.num_hashes
            )));
        }
        Ok(())
    }
}

/// Whether clustering spans the whole corpus or runs per `source` label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupScope {
    #[default]
    Global,
    PerSource,
}

/// One row of the before/after token accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupRow {
    pub threshold: Option<f64>,
    pub dedup: bool,
    pub samples: usize,
    pub tokens: u64,
    pub avg: f64,
}

impl DedupRow {
    fn new(threshold: Option<f64>, dedup: bool, samples: usize, tokens: u64) -> Self {
        let avg = if samples == 0 {
            0.0
        } else {
            tokens as f64 / samples as f64
        };
        DedupRow {
            threshold,
            dedup,
            samples,
            tokens,
            avg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    /// Name of the tokenizer behind the token columns.
    pub tokenizer: String,
    pub rows: Vec<DedupRow>,
    pub clusters: usize,
    pub removed: usize,
}

impl DedupReport {
    pub fn before(&self) -> &DedupRow {
        &self.rows[0]
    }

    pub fn after(&self) -> &DedupRow {
        &self.rows[1]
    }
}

/// Per-position keep flags: the lowest-id member of every cluster and every
/// unclustered document survive. Document ids are stream positions.
pub fn keep_mask(clusters: &mut ClusterSet, n: usize) -> Vec<bool> {
    (0..n as u64)
        .map(|id| clusters.representative(id).is_none_or(|rep| rep == id))
        .collect()
}

impl DedupReport {
    /// Token accounting for `docs` before and after applying `keep`.
    pub fn from_mask<'a>(
        docs: impl IntoIterator<Item = &'a Document>,
        keep: &[bool],
        clusters: usize,
    ) -> Self {
        let (mut n_in, mut n_out, mut tok_in, mut tok_out) = (0usize, 0usize, 0u64, 0u64);
        for (doc, &k) in docs.into_iter().zip(keep) {
            let tokens = whitespace_tokens(&doc.content) as u64;
            n_in += 1;
            tok_in += tokens;
            if k {
                n_out += 1;
                tok_out += tokens;
            }
        }
        DedupReport {
            tokenizer: "whitespace".into(),
            rows: vec![
                DedupRow::new(None, false, n_in, tok_in),
                DedupRow::new(None, true, n_out, tok_out),
            ],
            clusters,
            removed: n_in - n_out,
        }
    }
}

/// Keeps the lowest-id member of every cluster and every unclustered
/// document. Document ids are stream positions.
pub fn deduplicate(
    docs: impl IntoIterator<Item = Document>,
    clusters: &mut ClusterSet,
) -> (Vec<Document>, DedupReport) {
    let docs: Vec<Document> = docs.into_iter().collect();
    let keep = keep_mask(clusters, docs.len());
    let report = DedupReport::from_mask(&docs, &keep, clusters.clusters().len());
    let kept = docs
        .into_iter()
        .zip(&keep)
        .filter_map(|(d, &k)| k.then_some(d))
        .collect();
    (kept, report)
}

/// Computes signatures for every document in parallel; ids are positions.
pub fn sign_documents(docs: &[Document], cfg: &LshConfig) -> Result<Vec<MinHashSignature>> {
    cfg.validate()?;
    let hasher = MinHasher::new(cfg);
    Ok(docs
        .par_iter()
        .enumerate()
        .map(|(i, d)| hasher.sign_text(i as u64, &d.content))
        .collect())
}

/// Signs and clusters a batch; with `PerSource` only documents sharing a
/// `source` label can join a cluster.
pub fn cluster_documents(docs: &[Document], cfg: &LshConfig, scope: DedupScope) -> Result<ClusterSet> {
    let sigs = sign_documents(docs, cfg)?;
    match scope {
        DedupScope::Global => find_duplicates(&sigs, cfg),
        DedupScope::PerSource => {
            let mut shards: BTreeMap<&str, Vec<MinHashSignature>> = BTreeMap::new();
            for (d, s) in docs.iter().zip(sigs) {
                shards.entry(d.source.as_str()).or_default().push(s);
            }
            let mut all = ClusterSet::new(0..docs.len() as u64)?;
            for shard in shards.values() {
                let mut c = find_duplicates(shard, cfg)?;
                for group in c.clusters() {
                    for w in group.windows(2) {
                        all.union(w[0], w[1]);
                    }
                }
            }
            Ok(all)
        }
    }
}

/// Signs, clusters and deduplicates a batch.
pub fn dedup_documents(
    docs: Vec<Document>,
    cfg: &LshConfig,
    scope: DedupScope,
) -> Result<(Vec<Document>, DedupReport)> {
    let mut clusters = cluster_documents(&docs, cfg, scope)?;
    Ok(deduplicate(docs, &mut clusters))
}
