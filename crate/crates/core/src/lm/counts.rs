use std::collections::HashMap;

use super::{BOS_ID, EOS_ID};

/// Raw n-gram counts for orders 1..=N, taken at every predicted position of
/// the padded sentences. Shards merge by addition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    order: usize,
    raw: Vec<HashMap<Vec<u32>, u64>>,
}

impl NGramCounts {
    pub fn new(order: usize) -> Self {
        NGramCounts {
            order,
            raw: vec![HashMap::new(); order],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_sentence(&mut self, ids: &[u32]) {
        let n = self.order;
        let mut seq = Vec::with_capacity(ids.len() + n);
        seq.extend(std::iter::repeat_n(BOS_ID, n - 1));
        seq.extend_from_slice(ids);
        if n > 1 {
            seq.push(EOS_ID);
        }
        for i in (n - 1)..seq.len() {
            for m in 1..=n {
                *self.raw[m - 1].entry(seq[i + 1 - m..=i].to_vec()).or_insert(0) += 1;
            }
        }
    }

    pub fn merge(&mut self, other: NGramCounts) {
        assert_eq!(self.order, other.order, "merging counts of different orders");
        for (mine, theirs) in self.raw.iter_mut().zip(other.raw) {
            if mine.is_empty() {
                *mine = theirs;
                continue;
            }
            for (k, v) in theirs {
                *mine.entry(k).or_insert(0) += v;
            }
        }
    }

    /// Raw counts of m-grams.
    pub fn raw(&self, m: usize) -> &HashMap<Vec<u32>, u64> {
        &self.raw[m - 1]
    }

    /// Continuation counts for m < N: the number of distinct tokens seen
    /// immediately before each m-gram.
    pub fn continuation(&self, m: usize) -> HashMap<Vec<u32>, u64> {
        assert!(m < self.order);
        let mut out: HashMap<Vec<u32>, u64> = HashMap::new();
        for gram in self.raw[m].keys() {
            *out.entry(gram[1..].to_vec()).or_insert(0) += 1;
        }
        out
    }
}
