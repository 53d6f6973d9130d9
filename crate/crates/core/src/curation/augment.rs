use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{map_ordered, render_rewrite_prompt, Completer, StyleTemplate};
use crate::corpus::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub seed: u64,
    /// Requests in flight at once.
    pub max_concurrency: usize,
    /// Failed completions tolerated before the run aborts.
    pub error_budget: usize,
    /// Documents read ahead per batch; bounds memory on long streams.
    pub batch_size: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            seed: 0,
            max_concurrency: 4,
            error_budget: 20,
            batch_size: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedDoc {
    pub index: usize,
    pub url: String,
    pub client: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientUsage {
    pub name: String,
    pub chosen: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub docs_in: usize,
    pub rewritten: usize,
    pub clients: Vec<ClientUsage>,
    /// Per template position in the configured list.
    pub template_counts: Vec<usize>,
    pub skipped: Vec<SkippedDoc>,
}

/// Rewrites each document through a randomly chosen (template, client) pair.
///
/// Choices are drawn from `cfg.seed` in input order before any request is
/// sent, so they do not depend on concurrency or on which calls fail. Output
/// order follows input order; failed and empty completions are skipped and
/// reported.
pub fn augment_stream<I, F>(
    docs: I,
    templates: &[StyleTemplate],
    clients: &[&dyn Completer],
    cfg: &AugmentConfig,
    mut sink: F,
) -> Result<AugmentReport>
where
    I: IntoIterator<Item = Document>,
    F: FnMut(Document) -> Result<()>,
{
    if templates.is_empty() || clients.is_empty() {
        return Err(Error::config("augment needs at least one template and one client"));
    }
    if cfg.max_concurrency == 0 || cfg.batch_size == 0 {
        return Err(Error::config("max_concurrency and batch_size must be ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = AugmentReport {
        clients: clients
            .iter()
            .map(|c| ClientUsage {
                name: c.name().to_string(),
                ..Default::default()
            })
            .collect(),
        template_counts: vec![0; templates.len()],
        ..Default::default()
    };
    let mut failures = 0usize;
    let mut docs = docs.into_iter().peekable();
    while docs.peek().is_some() {
        let batch: Vec<(usize, Document, usize, usize)> = docs
            .by_ref()
            .take(cfg.batch_size)
            .map(|d| {
                let t = rng.gen_range(0..templates.len());
                let c = rng.gen_range(0..clients.len());
                let i = report.docs_in;
                report.docs_in += 1;
                (i, d, t, c)
            })
            .collect();
        let results = map_ordered(&batch, cfg.max_concurrency, |(_, doc, t, c)| {
            let prompt = render_rewrite_prompt(&doc.content, &templates[*t])?;
            clients[*c].complete(&prompt)
        });
        for ((index, doc, t, c), result) in batch.into_iter().zip(results) {
            report.template_counts[t] += 1;
            report.clients[c].chosen += 1;
            let reason = match result {
                Ok(text) if !text.trim().is_empty() => {
                    report.rewritten += 1;
                    sink(Document { content: text, ..doc })?;
                    continue;
                }
                Ok(_) => "empty completion".to_string(),
                Err(Error::Empty(msg)) => {
                    report.skipped.push(SkippedDoc {
                        index,
                        url: doc.url,
                        client: None,
                        reason: msg,
                    });
                    continue;
                }
                Err(e) => e.to_string(),
            };
            failures += 1;
            report.clients[c].failed += 1;
            report.skipped.push(SkippedDoc {
                index,
                url: doc.url,
                client: Some(report.clients[c].name.clone()),
                reason,
            });
            if failures > cfg.error_budget {
                return Err(Error::Completion(format!(
                    "error budget of {} exhausted at document {index}; last error: {}",
                    cfg.error_budget,
                    report.skipped.last().unwrap().reason
                )));
            }
        }
    }
    Ok(report)
}

pub fn augment(
    docs: Vec<Document>,
    templates: &[StyleTemplate],
    clients: &[&dyn Completer],
    cfg: &AugmentConfig,
) -> Result<(Vec<Document>, AugmentReport)> {
    let mut out = Vec::with_capacity(docs.len());
    let report = augment_stream(docs, templates, clients, cfg, |d| {
        out.push(d);
        Ok(())
    })?;
    Ok((out, report))
}
