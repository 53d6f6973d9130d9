//! Word n-gram language models with add-k or interpolated Kneser-Ney
//! smoothing, perplexity scoring, and per-source perplexity filtering.
//!
//! Each non-empty line of a document is one sentence. For order N ≥ 2 a
//! sentence is padded with N−1 `<s>` tokens and closed with `</s>`; `</s>`
//! is predicted and scored, `<s>` is context only. Unigram models use no
//! sentence markers at all.
//!
//! Probabilities are stored ARPA-style: a table of explicit probabilities
//! per order plus a backoff weight per context. A query that misses the
//! table at order m falls back to `backoff(context) · P(w | shorter context)`,
//! bottoming out in `floor · 1/V`. For interpolated Kneser-Ney the stored
//! probability of a seen n-gram already includes the interpolated lower-order
//! term, so the same lookup rule serves both smoothing schemes.

mod counts;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::filters::{rule, FilterReport, Verdict};
use crate::tokenize::tokenize;

pub use counts::NGramCounts;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothing {
    AddK { k: f64 },
    KneserNey { discount: f64 },
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::KneserNey { discount: 0.75 }
    }
}

impl Smoothing {
    fn validate(&self) -> Result<()> {
        match *self {
            Smoothing::AddK { k } if !(k > 0.0 && k.is_finite()) => {
                Err(Error::config(format!("add-k constant must be > 0, got {k}")))
            }
            Smoothing::KneserNey { discount } if !(discount > 0.0 && discount < 1.0) => Err(
                Error::config(format!("Kneser-Ney discount must be in (0,1), got {discount}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Token ↔ id table. Ids 0..3 are `<unk>`, `<s>`, `</s>`; words follow in
/// lexicographic order so the table is independent of corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn from_words(words: BTreeSet<String>) -> Self {
        let tokens: Vec<String> = [UNK, BOS, EOS]
            .into_iter()
            .map(String::from)
            .chain(words.into_iter().filter(|w| w != UNK && w != BOS && w != EOS))
            .collect();
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, ids }
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    smoothing: Smoothing,
    vocab: Vocab,
    /// `probs[m - 1]` maps m-grams to their stored probability.
    probs: Vec<HashMap<Vec<u32>, f64>>,
    /// `backoffs[m - 1]` maps length-m contexts to their backoff weight.
    backoffs: Vec<HashMap<Vec<u32>, f64>>,
    /// Weight on the uniform distribution below the unigram table.
    floor: f64,
}

fn sentences(text: &str) -> impl Iterator<Item = Vec<String>> + '_ {
    text.lines().map(tokenize).filter(|t| !t.is_empty())
}

impl NGramModel {
    /// Trains over every line of every document.
    pub fn train(docs: &[Document], order: usize, smoothing: Smoothing) -> Result<Self> {
        let texts: Vec<&str> = docs.iter().map(|d| d.content.as_str()).collect();
        Self::train_texts(&texts, order, smoothing)
    }

    pub fn train_texts(texts: &[&str], order: usize, smoothing: Smoothing) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("order must be ≥ 1"));
        }
        smoothing.validate()?;
        // pass 1: vocabulary
        let words = texts
            .par_iter()
            .fold(BTreeSet::new, |mut acc, t| {
                for s in sentences(t) {
                    acc.extend(s);
                }
                acc
            })
            .reduce(BTreeSet::new, |mut a, b| {
                a.extend(b);
                a
            });
        if words.is_empty() {
            return Err(Error::Empty("training corpus has no tokens".into()));
        }
        let vocab = Vocab::from_words(words);
        // pass 2: counts, merged across shards
        let counts = texts
            .par_iter()
            .fold(
                || NGramCounts::new(order),
                |mut acc, t| {
                    for s in sentences(t) {
                        let ids: Vec<u32> = s.iter().map(|w| vocab.id(w)).collect();
                        acc.add_sentence(&ids);
                    }
                    acc
                },
            )
            .reduce(|| NGramCounts::new(order), |mut a, b| {
                a.merge(b);
                a
            });
        Ok(Self::from_counts(vocab, &counts, smoothing))
    }

    /// Size of the predicted vocabulary: every word plus `<unk>`, plus `</s>`
    /// when sentence markers are in use.
    pub fn predict_size(&self) -> usize {
        if self.order == 1 {
            self.vocab.len() - 2
        } else {
            self.vocab.len() - 1
        }
    }

    /// Ids that carry probability mass.
    pub fn predicted_ids(&self) -> impl Iterator<Item = u32> + '_ {
        let skip_eos = self.order == 1;
        (0..self.vocab.len() as u32)
            .filter(move |&id| id != BOS_ID && !(skip_eos && id == EOS_ID))
    }

    fn from_counts(vocab: Vocab, counts: &NGramCounts, smoothing: Smoothing) -> Self {
        let order = counts.order();
        let mut model = NGramModel {
            order,
            smoothing,
            vocab,
            probs: vec![HashMap::new(); order],
            backoffs: vec![HashMap::new(); order],
            floor: 1.0,
        };
        let v = model.predict_size() as f64;
        match smoothing {
            Smoothing::AddK { k } => {
                let top = counts.raw(order);
                let ctx_totals = context_totals(top);
                for (gram, &c) in top {
                    let ctx = &gram[..order - 1];
                    let total = ctx_totals[ctx].0 as f64;
                    model.probs[order - 1].insert(gram.clone(), (c as f64 + k) / (total + k * v));
                }
                if order == 1 {
                    let total: u64 = top.values().sum();
                    model.floor = k * v / (total as f64 + k * v);
                } else {
                    for (ctx, &(total, _)) in &ctx_totals {
                        model.backoffs[order - 2]
                            .insert(ctx.clone(), k * v / (total as f64 + k * v));
                    }
                }
            }
            Smoothing::KneserNey { discount } => {
                // lowest order first so higher orders can interpolate
                for m in 1..=order {
                    let table: HashMap<Vec<u32>, u64> = if m == order {
                        counts.raw(m).clone()
                    } else {
                        counts.continuation(m)
                    };
                    let ctx_totals = context_totals(&table);
                    let mut probs = HashMap::with_capacity(table.len());
                    for (gram, &c) in &table {
                        let ctx = &gram[..m - 1];
                        let (total, types) = ctx_totals[ctx];
                        let gamma = discount * types as f64 / total as f64;
                        let lower = if m == 1 {
                            1.0 / v
                        } else {
                            model.lookup(&gram[1..m - 1], gram[m - 1])
                        };
                        let p = (c as f64 - discount).max(0.0) / total as f64 + gamma * lower;
                        probs.insert(gram.clone(), p);
                    }
                    model.probs[m - 1] = probs;
                    for (ctx, (total, types)) in ctx_totals {
                        let gamma = discount * types as f64 / total as f64;
                        if m == 1 {
                            model.floor = gamma;
                        } else {
                            model.backoffs[m - 2].insert(ctx, gamma);
                        }
                    }
                }
            }
        }
        model
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Backoff weight stored for `context` (1 when the context was never seen).
    pub fn backoff(&self, context: &[u32]) -> f64 {
        if context.is_empty() {
            return self.floor;
        }
        self.backoffs[context.len() - 1]
            .get(context)
            .copied()
            .unwrap_or(1.0)
    }

    /// Whether `gram` has an explicit table entry.
    pub fn has_entry(&self, gram: &[u32]) -> bool {
        !gram.is_empty()
            && gram.len() <= self.order
            && self.probs[gram.len() - 1].contains_key(gram)
    }

    fn lookup(&self, context: &[u32], word: u32) -> f64 {
        let mut ctx = context;
        let mut weight = 1.0;
        loop {
            let m = ctx.len() + 1;
            if let Some(p) = self.probs[m - 1].get(&concat(ctx, word)) {
                return weight * p;
            }
            weight *= self.backoff(ctx);
            if ctx.is_empty() {
                return weight / self.predict_size() as f64;
            }
            ctx = &ctx[1..];
        }
    }

    /// P(word | context) by ids. Only the last N−1 context ids are used.
    pub fn prob_ids(&self, context: &[u32], word: u32) -> f64 {
        let keep = context.len().min(self.order - 1);
        self.lookup(&context[context.len() - keep..], word)
    }

    /// P(word | context) by token strings; unknown tokens map to `<unk>`.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|t| self.vocab.id(t)).collect();
        self.prob_ids(&ctx, self.vocab.id(word))
    }

    /// Total natural-log probability and number of scored tokens.
    pub fn log_prob(&self, text: &str) -> (f64, usize) {
        let n = self.order;
        let mut total = 0.0;
        let mut count = 0;
        let mut seq: Vec<u32> = Vec::new();
        for s in sentences(text) {
            seq.clear();
            seq.extend(std::iter::repeat_n(BOS_ID, n - 1));
            seq.extend(s.iter().map(|w| self.vocab.id(w)));
            if n > 1 {
                seq.push(EOS_ID);
            }
            for i in (n - 1)..seq.len() {
                total += self.lookup(&seq[i + 1 - n..i], seq[i]).ln();
                count += 1;
            }
        }
        (total, count)
    }

    /// exp of the mean negative log-likelihood per scored token.
    pub fn perplexity(&self, text: &str) -> Result<f64> {
        let (lp, t) = self.log_prob(text);
        if t == 0 {
            return Err(Error::Empty("text has no tokens to score".into()));
        }
        Ok((-lp / t as f64).exp())
    }
}

fn concat(ctx: &[u32], word: u32) -> Vec<u32> {
    let mut v = Vec::with_capacity(ctx.len() + 1);
    v.extend_from_slice(ctx);
    v.push(word);
    v
}

/// Per context: (sum of counts, number of distinct continuations).
fn context_totals(table: &HashMap<Vec<u32>, u64>) -> HashMap<Vec<u32>, (u64, u64)> {
    let mut out: HashMap<Vec<u32>, (u64, u64)> = HashMap::new();
    for (gram, &c) in table {
        let e = out.entry(gram[..gram.len() - 1].to_vec()).or_default();
        e.0 += c;
        e.1 += 1;
    }
    out
}

/// Maximum perplexity per source label, with an optional fallback.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerplexityThresholds {
    #[serde(default)]
    pub per_source: BTreeMap<String, f64>,
    #[serde(default)]
    pub default: Option<f64>,
}

impl PerplexityThresholds {
    pub fn for_source(&self, source: &str) -> Result<f64> {
        self.per_source
            .get(source)
            .copied()
            .or(self.default)
            .ok_or_else(|| Error::MissingThreshold(source.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.per_source.values().chain(self.default.iter());
        if let Some(bad) = all.into_iter().find(|t| !(**t > 0.0)) {
            return Err(Error::config(format!("perplexity thresholds must be > 0, got {bad}")));
        }
        Ok(())
    }
}

/// Keeps a document iff its perplexity is at most its source's threshold.
/// Documents with nothing to score are dropped.
pub fn lm_verdict(doc: &Document, model: &NGramModel, thresholds: &PerplexityThresholds) -> Result<Verdict> {
    let max = thresholds.for_source(&doc.source)?;
    Ok(match model.perplexity(&doc.content) {
        Ok(ppl) if ppl <= max => Verdict::Keep {
            doc: doc.clone(),
            lines_dropped: BTreeMap::new(),
        },
        Ok(_) => Verdict::Drop(rule::PERPLEXITY),
        Err(_) => Verdict::Drop(rule::UNSCORABLE),
    })
}

/// Batch perplexity filter; scoring runs in parallel, output keeps input order.
pub fn lm_filter(
    docs: Vec<Document>,
    model: &NGramModel,
    thresholds: &PerplexityThresholds,
) -> Result<(Vec<Document>, FilterReport)> {
    let verdicts: Vec<Verdict> = docs
        .par_iter()
        .map(|d| lm_verdict(d, model, thresholds))
        .collect::<Result<_>>()?;
    let mut report = FilterReport::default();
    let mut kept = Vec::new();
    for v in verdicts {
        report.record(&v);
        if let Some(d) = v.into_doc() {
            kept.push(d);
        }
    }
    Ok((kept, report))
}

#[cfg(test)]
mod tests;
