use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::LshConfig;
use crate::error::{Error, Result};
use crate::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub doc_id: u64,
    pub values: Vec<u64>,
}

/// Word k-gram shingles of `text`. A text shorter than `k` tokens yields its
/// whole token sequence as the single shingle.
pub fn shingles(text: &str, k: usize) -> BTreeSet<String> {
    let tokens = tokenize(text);
    let mut out = BTreeSet::new();
    for_each_shingle(&tokens, k, |s| {
        out.insert(s.to_string());
    });
    out
}

fn for_each_shingle(tokens: &[String], k: usize, mut f: impl FnMut(&str)) {
    if tokens.is_empty() {
        return;
    }
    let k = k.max(1);
    let mut buf = String::new();
    let windows = if tokens.len() < k { 1 } else { tokens.len() - k + 1 };
    let width = k.min(tokens.len());
    for start in 0..windows {
        buf.clear();
        for (j, t) in tokens[start..start + width].iter().enumerate() {
            if j > 0 {
                buf.push(' ');
            }
            buf.push_str(t);
        }
        f(&buf);
    }
}

/// splitmix64 finalizer; a bijection on u64.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash family h_i(x) = mix64(xxh3(x, seed) ^ salt_i), salts derived from
/// (seed, i).
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    shingle_size: usize,
    salts: Vec<u64>,
}

impl MinHasher {
    pub fn new(cfg: &LshConfig) -> Self {
        let salts = (0..cfg.num_hashes as u64)
            .map(|i| mix64(cfg.seed ^ mix64(i.wrapping_add(0x9e37_79b9_7f4a_7c15))))
            .collect();
        MinHasher {
            seed: cfg.seed,
            shingle_size: cfg.shingle_size,
            salts,
        }
    }

    #[inline]
    fn base(&self, shingle: &str) -> u64 {
        xxh3_64_with_seed(shingle.as_bytes(), self.seed)
    }

    fn absorb(&self, base: u64, mins: &mut [u64]) {
        for (m, &salt) in mins.iter_mut().zip(&self.salts) {
            let h = mix64(base ^ salt);
            if h < *m {
                *m = h;
            }
        }
    }

    pub fn sign<'a>(
        &self,
        doc_id: u64,
        shingles: impl IntoIterator<Item = &'a str>,
    ) -> Result<MinHashSignature> {
        let mut mins = vec![u64::MAX; self.salts.len()];
        let mut any = false;
        for s in shingles {
            any = true;
            self.absorb(self.base(s), &mut mins);
        }
        if !any {
            return Err(Error::Empty("cannot sign an empty shingle set".into()));
        }
        Ok(MinHashSignature {
            doc_id,
            values: mins,
        })
    }

    /// Signs a text directly, without materializing the shingle set. Texts
    /// with no tokens all share the all-`u64::MAX` signature.
    pub fn sign_text(&self, doc_id: u64, text: &str) -> MinHashSignature {
        let tokens = tokenize(text);
        let mut mins = vec![u64::MAX; self.salts.len()];
        for_each_shingle(&tokens, self.shingle_size, |s| self.absorb(self.base(s), &mut mins));
        MinHashSignature {
            doc_id,
            values: mins,
        }
    }
}

pub fn signature(shingles: &BTreeSet<String>, cfg: &LshConfig) -> Result<MinHashSignature> {
    MinHasher::new(cfg).sign(0, shingles.iter().map(String::as_str))
}
