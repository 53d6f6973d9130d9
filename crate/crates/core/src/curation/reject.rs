use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{ChatSample, JsonlRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsweredSample {
    #[serde(flatten)]
    pub sample: ChatSample,
    pub extracted_answer: String,
    /// Label for the per-dataset acceptance counts.
    #[serde(default)]
    pub dataset: String,
}

impl JsonlRecord for AnsweredSample {
    fn check(self) -> Result<Self> {
        self.sample.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub accepted: usize,
    pub total: usize,
}

impl fmt::Display for Acceptance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.accepted, self.total)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub datasets: BTreeMap<String, Acceptance>,
}

impl RejectionReport {
    /// One "dataset  accepted/total" line per dataset.
    pub fn table(&self) -> String {
        let width = self.datasets.keys().map(|k| k.len()).max().unwrap_or(0).max(7);
        let mut out = format!("{:<width$}  Accepted\n", "Dataset");
        for (name, a) in &self.datasets {
            out.push_str(&format!("{name:<width$}  {a}\n"));
        }
        out
    }
}

pub fn normalize_answer(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Keeps samples whose extracted answer matches the key for their prompt.
pub fn rejection_sample<I>(
    samples: I,
    answer_key: &HashMap<String, String>,
) -> Result<(Vec<AnsweredSample>, RejectionReport)>
where
    I: IntoIterator<Item = AnsweredSample>,
{
    let mut report = RejectionReport::default();
    let mut kept = Vec::new();
    for s in samples {
        let key = answer_key.get(&s.sample.prompt_id).ok_or_else(|| {
            Error::invalid(format!("no answer key for prompt_id {:?}", s.sample.prompt_id))
        })?;
        let row = report.datasets.entry(s.dataset.clone()).or_default();
        row.total += 1;
        if normalize_answer(&s.extracted_answer) == normalize_answer(key) {
            row.accepted += 1;
            kept.push(s);
        }
    }
    Ok((kept, report))
}

/// Pulls the final answer from a reasoning trace ending in a line like
/// `Answer: B`. Takes the last such line and strips surrounding brackets,
/// emphasis markers and a trailing period. Answers that span several lines
/// or are stated without the `Answer:` label are not recognized.
pub fn extract_answer(text: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?im)^[\s*#>_-]*(?:final\s+)?answer\s*[*_]*\s*[:：]\s*(.+)$").unwrap());
    let raw = re.captures_iter(text).last()?.get(1)?.as_str();
    let cleaned = raw
        .trim()
        .trim_matches(|c: char| matches!(c, '*' | '_' | '`'))
        .trim_end_matches('.')
        .trim()
        .trim_start_matches(['(', '['])
        .trim_end_matches([')', ']'])
        .trim();
    (!cleaned.is_empty()).then(|| cleaned.to_string())
}
