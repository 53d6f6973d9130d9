//! Task-vector arithmetic, DARE-TIES merging and merge-ratio grid search over
//! named float32 parameter arrays.

mod io;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::dedup::mix64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    pub entries: BTreeMap<String, Vec<f32>>,
    pub metadata: BTreeMap<String, String>,
}

/// Per-name deltas, kept in f64 so `base + (model − base)` round-trips.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskVector {
    pub entries: BTreeMap<String, Vec<f64>>,
}

impl ParameterMap {
    pub fn check_finite(&self) -> Result<()> {
        for (name, xs) in &self.entries {
            if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(format!(
                    "parameter {name:?} has non-finite value {} at index {i}",
                    xs[i]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_shapes<A, B>(
    what: &str,
    a: &BTreeMap<String, Vec<A>>,
    b: &BTreeMap<String, Vec<B>>,
) -> Result<()> {
    let mut problems = Vec::new();
    for (name, xs) in a {
        match b.get(name) {
            None => problems.push(format!("{name:?} missing from base")),
            Some(ys) if ys.len() != xs.len() => {
                problems.push(format!("{name:?} has length {} vs {}", xs.len(), ys.len()))
            }
            Some(_) => {}
        }
    }
    for name in b.keys().filter(|n| !a.contains_key(*n)) {
        problems.push(format!("{name:?} missing from {what}"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what} does not match base: {}", problems.join("; "))))
    }
}

pub fn task_vector(model: &ParameterMap, base: &ParameterMap) -> Result<TaskVector> {
    check_shapes("model", &model.entries, &base.entries)?;
    let entries = model
        .entries
        .par_iter()
        .map(|(name, m)| {
            let b = &base.entries[name];
            let d = m.iter().zip(b).map(|(&m, &b)| m as f64 - b as f64).collect();
            (name.clone(), d)
        })
        .collect();
    Ok(TaskVector { entries })
}

/// `base + tv`, rounded to f32. Keeps the base metadata.
pub fn apply(base: &ParameterMap, tv: &TaskVector) -> Result<ParameterMap> {
    check_shapes("task vector", &tv.entries, &base.entries)?;
    let entries = base
        .entries
        .par_iter()
        .map(|(name, b)| {
            let d = &tv.entries[name];
            let out = b.iter().zip(d).map(|(&b, &d)| (b as f64 + d) as f32).collect();
            (name.clone(), out)
        })
        .collect();
    Ok(ParameterMap {
        entries,
        metadata: base.metadata.clone(),
    })
}

/// Uniform [0, 1) draw that depends only on (seed, name, index), so any
/// parallel split of the work gives the same result.
///
/// Each element gets a hashed offset and the seed advances it along a
/// golden-ratio Weyl sequence. Within one seed the draws behave as
/// independent uniforms; across consecutive seeds each element's draws are
/// equidistributed, which keeps seed-averaged estimates tight.
pub fn element_uniform(seed: u64, name: &str, index: usize) -> f64 {
    let offset = mix64(xxh3_64(name.as_bytes()) ^ mix64(index as u64));
    let h = offset.wrapping_add(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Drops each element with probability `p` and rescales survivors by 1/(1−p).
pub fn dare(tv: &TaskVector, drop_prob: f64, seed: u64) -> Result<TaskVector> {
    if !(0.0..1.0).contains(&drop_prob) {
        return Err(Error::config(format!("drop probability {drop_prob} not in [0, 1)")));
    }
    if drop_prob == 0.0 {
        return Ok(tv.clone());
    }
    let keep = 1.0 - drop_prob;
    let entries = tv
        .entries
        .par_iter()
        .map(|(name, xs)| {
            let out = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if element_uniform(seed, name, i) < drop_prob {
                        0.0
                    } else {
                        x / keep
                    }
                })
                .collect();
            (name.clone(), out)
        })
        .collect();
    Ok(TaskVector { entries })
}

/// Zeroes all but the ⌈density·len⌉ largest-magnitude entries. Equal
/// magnitudes are ranked by index.
pub fn trim(xs: &[f64], density: f64) -> Vec<f64> {
    let k = ((density * xs.len() as f64).ceil() as usize).min(xs.len());
    if k == xs.len() {
        return xs.to_vec();
    }
    let mut out = vec![0.0; xs.len()];
    if k == 0 {
        return out;
    }
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    let rank = |a: &usize, b: &usize| xs[*b].abs().total_cmp(&xs[*a].abs()).then(a.cmp(b));
    idx.select_nth_unstable_by(k - 1, rank);
    for &i in &idx[..k] {
        out[i] = xs[i];
    }
    out
}

/// Trim, elect a sign per coordinate from the weighted sum (zero elects +),
/// then average the agreeing nonzero entries weighted by their vector's weight.
pub fn ties_merge(tvs: &[(&TaskVector, f64)], density: f64) -> Result<TaskVector> {
    let (first, _) = tvs
        .first()
        .ok_or_else(|| Error::invalid("ties_merge needs at least one task vector"))?;
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::config(format!("density {density} not in (0, 1]")));
    }
    if let Some((_, w)) = tvs.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::config(format!("merge weight {w} must be finite and ≥ 0")));
    }
    for (tv, _) in &tvs[1..] {
        check_shapes("task vector", &tv.entries, &first.entries)?;
    }
    let entries = first
        .entries
        .par_iter()
        .map(|(name, xs)| {
            let trimmed: Vec<(Vec<f64>, f64)> = tvs
                .iter()
                .map(|(tv, w)| (trim(&tv.entries[name], density), *w))
                .collect();
            let out = (0..xs.len())
                .map(|j| {
                    let total: f64 = trimmed.iter().map(|(v, w)| w * v[j]).sum();
                    let positive = total >= 0.0;
                    let (mut num, mut den) = (0.0, 0.0);
                    for (v, w) in &trimmed {
                        let x = v[j];
                        if x != 0.0 && (x > 0.0) == positive {
                            num += w * x;
                            den += w;
                        }
                    }
                    if den > 0.0 {
                        num / den
                    } else {
                        0.0
                    }
                })
                .collect();
            (name.clone(), out)
        })
        .collect();
    Ok(TaskVector { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeConfig {
    pub drop_prob: f64,
    pub density: f64,
    pub seed: u64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            drop_prob: 0.5,
            density: 0.5,
            seed: 0,
        }
    }
}

/// DARE each model's task vector (seed derived per model position), merge
/// them with TIES and add the result back onto `base`.
pub fn dare_ties(
    base: &ParameterMap,
    models: &[(&ParameterMap, f64)],
    cfg: &MergeConfig,
) -> Result<ParameterMap> {
    if models.is_empty() {
        return Err(Error::invalid("dare_ties needs at least one model"));
    }
    let tvs = models
        .iter()
        .enumerate()
        .map(|(i, (m, w))| {
            let tv = task_vector(m, base)?;
            let seed = mix64(cfg.seed ^ mix64(i as u64 + 1));
            Ok((dare(&tv, cfg.drop_prob, seed)?, *w))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(&TaskVector, f64)> = tvs.iter().map(|(tv, w)| (tv, *w)).collect();
    apply(base, &ties_merge(&refs, cfg.density)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeRatio {
    pub w: f64,
    pub weight_a: f64,
    pub weight_b: f64,
}

impl MergeRatio {
    pub fn new(w: f64) -> Self {
        MergeRatio {
            w,
            weight_a: 0.5 + w,
            weight_b: 0.5 - w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(flatten)]
    pub ratio: MergeRatio,
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: MergeRatio,
    pub best_score: f64,
    pub table: Vec<GridPoint>,
}

/// Grid points w = 0, step, …, 0.5; `step` must divide 0.5.
pub fn grid_points(step: f64) -> Result<Vec<f64>> {
    let n = 0.5 / step;
    if !(step > 0.0) || !n.is_finite() || (n - n.round()).abs() > 1e-9 {
        return Err(Error::config(format!("step {step} does not divide 0.5")));
    }
    let n = n.round() as usize;
    Ok((0..=n).map(|i| 0.5 * i as f64 / n as f64).collect())
}

/// Scores the (0.5+w):(0.5−w) merge of `a` and `b` at each grid point. A
/// failing or non-finite score is recorded and the point skipped; the best
/// point is the highest score, smallest w on ties.
pub fn grid_search<F>(
    base: &ParameterMap,
    a: &ParameterMap,
    b: &ParameterMap,
    mut scorer: F,
    step: f64,
    cfg: &MergeConfig,
) -> Result<GridResult>
where
    F: FnMut(&ParameterMap) -> Result<f64>,
{
    let mut table = Vec::new();
    let mut best: Option<(MergeRatio, f64)> = None;
    for w in grid_points(step)? {
        let ratio = MergeRatio::new(w);
        let merged = dare_ties(base, &[(a, ratio.weight_a), (b, ratio.weight_b)], cfg)?;
        let (score, error) = match scorer(&merged) {
            Ok(s) if s.is_finite() => (Some(s), None),
            Ok(s) => (None, Some(format!("scorer returned {s}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((ratio, s));
            }
        }
        table.push(GridPoint { ratio, score, error });
    }
    let (best, best_score) =
        best.ok_or_else(|| Error::invalid("scorer failed at every grid point"))?;
    Ok(GridResult {
        best,
        best_score,
        table,
    })
}
