use std::collections::HashMap;

use rayon::prelude::*;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::minhash::mix64;
use super::{ClusterSet, LshConfig, MinHashSignature};
use crate::error::{Error, Result};

/// Probability that a pair with Jaccard similarity `s` shares at least one
/// full band: 1 − (1 − s^r)^b.
pub fn detection_probability(s: f64, rows: usize, bands: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

fn band_key(slice: &[u64], band: usize, seed: u64) -> u64 {
    let mut bytes = Vec::with_capacity(slice.len() * 8);
    for v in slice {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    xxh3_64_with_seed(&bytes, mix64(seed ^ (band as u64 + 1)))
}

/// Colliding (representative, member) slot pairs within one band. Bucket
/// collisions are confirmed by comparing the full band slices.
fn band_pairs(sigs: &[MinHashSignature], band: usize, cfg: &LshConfig) -> Vec<(usize, usize)> {
    let r = cfg.rows_per_band;
    let slice = |i: usize| &sigs[i].values[band * r..(band + 1) * r];
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    for i in 0..sigs.len() {
        buckets
            .entry(band_key(slice(i), band, cfg.seed))
            .or_default()
            .push(i);
    }
    let mut pairs = Vec::new();
    for members in buckets.values().filter(|m| m.len() > 1) {
        let mut reps: Vec<usize> = Vec::new();
        for &m in members {
            match reps.iter().find(|&&rep| slice(rep) == slice(m)) {
                Some(&rep) => pairs.push((rep, m)),
                None => reps.push(m),
            }
        }
    }
    pairs
}

/// Unions every pair of documents that agree on all rows of any band.
/// Bands are scanned in parallel; unioning is serial.
pub fn find_duplicates(sigs: &[MinHashSignature], cfg: &LshConfig) -> Result<ClusterSet> {
    cfg.validate()?;
    if let Some(bad) = sigs.iter().find(|s| s.values.len() != cfg.num_hashes) {
        return Err(Error::Shape(format!(
            "signature for doc {} has {} values, expected {}",
            bad.doc_id,
            bad.values.len(),
            cfg.num_hashes
        )));
    }
    let mut clusters = ClusterSet::new(sigs.iter().map(|s| s.doc_id))?;
    let pairs: Vec<Vec<(usize, usize)>> = (0..cfg.num_bands)
        .into_par_iter()
        .map(|b| band_pairs(sigs, b, cfg))
        .collect();
    for (a, b) in pairs.into_iter().flatten() {
        clusters.union_slots(a, b);
    }
    Ok(clusters)
}
