use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapMatch {
    pub ngram: String,
    pub a_index: usize,
    pub b_index: usize,
}

/// Shared word n-grams between two corpora.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub n: usize,
    /// Number of distinct n-grams present on both sides.
    pub count: usize,
    pub matches: Vec<OverlapMatch>,
}

struct Interned {
    docs_a: Vec<Vec<u32>>,
    docs_b: Vec<Vec<u32>>,
    tokens: Vec<String>,
}

fn intern<S: AsRef<str>>(a: &[S], b: &[S]) -> Interned {
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut tokens = Vec::new();
    let mut conv = |text: &str| -> Vec<u32> {
        tokenize(text)
            .into_iter()
            .map(|t| {
                *ids.entry(t).or_insert_with_key(|k| {
                    tokens.push(k.clone());
                    (tokens.len() - 1) as u32
                })
            })
            .collect()
    };
    let docs_a = a.iter().map(|t| conv(t.as_ref())).collect();
    let docs_b = b.iter().map(|t| conv(t.as_ref())).collect();
    Interned {
        docs_a,
        docs_b,
        tokens,
    }
}

/// First corpus-B document holding each n-gram.
fn index_ngrams(docs: &[Vec<u32>], n: usize) -> HashMap<&[u32], usize> {
    let mut index = HashMap::new();
    for (i, d) in docs.iter().enumerate() {
        for w in d.windows(n) {
            index.entry(w).or_insert(i);
        }
    }
    index
}

/// Distinct word n-grams present in both corpora, each with one witness
/// index per side (its first occurrence). Texts shorter than `n` tokens
/// contribute nothing.
pub fn ngram_overlap<S: AsRef<str>>(corpus_a: &[S], corpus_b: &[S], n: usize) -> OverlapReport {
    let n = n.max(1);
    let data = intern(corpus_a, corpus_b);
    let index = index_ngrams(&data.docs_b, n);
    let mut seen: HashSet<&[u32]> = HashSet::new();
    let mut matches = Vec::new();
    for (ai, d) in data.docs_a.iter().enumerate() {
        for w in d.windows(n) {
            if let Some(&bi) = index.get(w) {
                if seen.insert(w) {
                    let ngram = w
                        .iter()
                        .map(|&t| data.tokens[t as usize].as_str())
                        .collect::<Vec<_>>()
                        .join(" ");
                    matches.push(OverlapMatch {
                        ngram,
                        a_index: ai,
                        b_index: bi,
                    });
                }
            }
        }
    }
    OverlapReport {
        n,
        count: matches.len(),
        matches,
    }
}

/// Indices of corpus-A texts sharing at least one n-gram with corpus B.
pub fn contaminated<S: AsRef<str>>(corpus_a: &[S], corpus_b: &[S], n: usize) -> Vec<usize> {
    let n = n.max(1);
    let data = intern(corpus_a, corpus_b);
    let index = index_ngrams(&data.docs_b, n);
    data.docs_a
        .iter()
        .enumerate()
        .filter(|(_, d)| d.windows(n).any(|w| index.contains_key(w)))
        .map(|(i, _)| i)
        .collect()
}
