//! Completion-service driven curation: style rewriting, judge-score
//! filtering and rejection sampling.

mod augment;
mod client;
mod judge;
mod reject;
mod template;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::corpus::Document;
use crate::error::{Error, Result};

pub use augment::{augment, augment_stream, AugmentConfig, AugmentReport, ClientUsage, SkippedDoc};
pub use client::{ClientConfig, Completer, CompletionClient};
pub use judge::{judge_filter, judge_sample, parse_judgement, render_conversation, JudgedSample};
pub use reject::{
    extract_answer, normalize_answer, rejection_sample, Acceptance, AnsweredSample,
    RejectionReport,
};
pub use template::{
    builtin_judge_template, builtin_relevance_template, render_rewrite_prompt, Style,
    StyleTemplate, Template, PLACEHOLDER,
};

/// Applies `f` to every item on up to `workers` threads and returns the
/// results in input order.
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

/// Asks a completion service whether a text is on-topic, reading the first
/// word of the reply as yes or no.
pub struct CompletionLabeler<'a> {
    pub completer: &'a dyn Completer,
    pub template: Template,
}

impl CompletionLabeler<'_> {
    pub fn ask(&self, text: &str) -> Result<bool> {
        let reply = self.completer.complete(&self.template.render(text))?;
        let first = reply
            .split(|c: char| !c.is_alphanumeric())
            .find(|w| !w.is_empty())
            .unwrap_or("")
            .to_lowercase();
        match first.as_str() {
            "yes" | "true" => Ok(true),
            "no" | "false" => Ok(false),
            _ => Err(Error::Completion(format!(
                "expected a yes/no reply, got {:?}",
                reply.chars().take(80).collect::<String>()
            ))),
        }
    }
}

impl crate::classifier::Labeler for CompletionLabeler<'_> {
    fn label(&self, doc: &Document) -> Result<bool> {
        self.ask(&doc.content)
    }
}
