//! Rule-based document and line filters: the C4 subset, per-source heuristic
//! phrases, and the length/score window used on pre-scored corpora.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tokenize::whitespace_tokens;

pub mod rule {
    pub const LINE_SUBSTRING: &str = "line_substring";
    pub const TERMINAL_PUNCT: &str = "terminal_punct";
    pub const DOC_SUBSTRING: &str = "doc_substring";
    pub const CURLY_BRACE: &str = "curly_brace";
    pub const TOO_SHORT: &str = "too_short";
    pub const HEURISTIC: &str = "heuristic_substring";
    pub const WINDOW: &str = "score_length_window";
    pub const PERPLEXITY: &str = "perplexity";
    pub const UNSCORABLE: &str = "unscorable";
}

fn default_line_substrings() -> Vec<String> {
    ["javascript", "terms-of-use", "terms of use", "cookie policy"]
        .map(String::from)
        .to_vec()
}

fn default_doc_substrings() -> Vec<String> {
    vec!["lorem ipsum".into()]
}

fn default_heuristic_substrings() -> Vec<String> {
    vec!["your download will begin in a few seconds".into()]
}

fn default_min_doc_words() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_line_substrings")]
    pub drop_line_substrings: Vec<String>,
    #[serde(default = "default_doc_substrings")]
    pub drop_doc_substrings: Vec<String>,
    #[serde(default = "default_heuristic_substrings")]
    pub heuristic_doc_substrings: Vec<String>,
    #[serde(default = "default_min_doc_words")]
    pub min_doc_words: usize,
    #[serde(default)]
    pub min_doc_chars: usize,
    #[serde(default)]
    pub score_window: Option<(f64, f64)>,
    #[serde(default)]
    pub apply_terminal_punct: bool,
    #[serde(default)]
    pub apply_curly_brace: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            drop_line_substrings: default_line_substrings(),
            drop_doc_substrings: default_doc_substrings(),
            heuristic_doc_substrings: default_heuristic_substrings(),
            min_doc_words: default_min_doc_words(),
            min_doc_chars: 0,
            score_window: None,
            apply_terminal_punct: false,
            apply_curly_brace: false,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.score_window {
            if !(lo < hi) {
                return Err(Error::config(format!(
                    "score_window low {lo} must be below high {hi}"
                )));
            }
        }
        let lists = [
            ("drop_line_substrings", &self.drop_line_substrings),
            ("drop_doc_substrings", &self.drop_doc_substrings),
            ("heuristic_doc_substrings", &self.heuristic_doc_substrings),
        ];
        for (name, list) in lists {
            if let Some(s) = list.iter().find(|s| s.to_lowercase() != **s || s.is_empty()) {
                return Err(Error::config(format!(
                    "{name} entries must be non-empty and lowercase, got {s:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of running one document through a filter.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Keep {
        doc: Document,
        lines_dropped: BTreeMap<&'static str, usize>,
    },
    Drop(&'static str),
}

impl Verdict {
    fn keep(doc: Document) -> Self {
        Verdict::Keep {
            doc,
            lines_dropped: BTreeMap::new(),
        }
    }

    pub fn into_doc(self) -> Option<Document> {
        match self {
            Verdict::Keep { doc, .. } => Some(doc),
            Verdict::Drop(_) => None,
        }
    }
}

fn ends_with_terminal_punct(line: &str) -> bool {
    line.trim_end().ends_with(['.', '!', '?', '"'])
}

/// C4-style cleaning: drops matching lines, then drops the whole document
/// on a banned phrase, a curly brace (if enabled) or too few words.
pub fn c4_verdict(doc: &Document, cfg: &FilterConfig) -> Verdict {
    let lowered = doc.content.to_lowercase();
    if cfg.drop_doc_substrings.iter().any(|s| lowered.contains(s.as_str())) {
        return Verdict::Drop(rule::DOC_SUBSTRING);
    }
    if cfg.apply_curly_brace && doc.content.contains('{') {
        return Verdict::Drop(rule::CURLY_BRACE);
    }
    let mut lines_dropped = BTreeMap::new();
    let mut kept = Vec::new();
    for line in doc.content.split('\n') {
        let l = line.to_lowercase();
        if cfg.drop_line_substrings.iter().any(|s| l.contains(s.as_str())) {
            *lines_dropped.entry(rule::LINE_SUBSTRING).or_insert(0) += 1;
        } else if cfg.apply_terminal_punct && !ends_with_terminal_punct(line) {
            *lines_dropped.entry(rule::TERMINAL_PUNCT).or_insert(0) += 1;
        } else {
            kept.push(line);
        }
    }
    let content = if lines_dropped.is_empty() {
        doc.content.clone()
    } else {
        kept.join("\n")
    };
    if whitespace_tokens(&content) < cfg.min_doc_words || content.trim().is_empty() {
        return Verdict::Drop(rule::TOO_SHORT);
    }
    Verdict::Keep {
        doc: Document {
            content,
            ..doc.clone()
        },
        lines_dropped,
    }
}

pub fn c4_filter(doc: &Document, cfg: &FilterConfig) -> Option<Document> {
    c4_verdict(doc, cfg).into_doc()
}

pub fn heuristic_verdict(doc: &Document, cfg: &FilterConfig) -> Verdict {
    let lowered = doc.content.to_lowercase();
    if cfg
        .heuristic_doc_substrings
        .iter()
        .any(|s| lowered.contains(s.as_str()))
    {
        Verdict::Drop(rule::HEURISTIC)
    } else {
        Verdict::keep(doc.clone())
    }
}

pub fn heuristic_filter(doc: &Document, cfg: &FilterConfig) -> Option<Document> {
    heuristic_verdict(doc, cfg).into_doc()
}

/// Keeps documents longer than `min_doc_chars` whose score lies strictly
/// inside the configured window. `length` is the content's char count.
pub fn window_filter(score: f64, length: usize, cfg: &FilterConfig) -> bool {
    let in_window = match cfg.score_window {
        Some((lo, hi)) => lo < score && score < hi,
        None => true,
    };
    length > cfg.min_doc_chars && in_window
}

/// Per-run counts for a filter stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub docs_in: usize,
    pub docs_out: usize,
    pub docs_dropped_by_rule: BTreeMap<String, usize>,
    pub lines_dropped_by_rule: BTreeMap<String, usize>,
}

impl FilterReport {
    pub fn record(&mut self, verdict: &Verdict) {
        self.docs_in += 1;
        match verdict {
            Verdict::Keep { lines_dropped, .. } => {
                self.docs_out += 1;
                for (rule, n) in lines_dropped {
                    *self.lines_dropped_by_rule.entry(rule.to_string()).or_insert(0) += n;
                }
            }
            Verdict::Drop(rule) => {
                *self.docs_dropped_by_rule.entry(rule.to_string()).or_insert(0) += 1;
            }
        }
    }

    pub fn record_keep(&mut self) {
        self.docs_in += 1;
        self.docs_out += 1;
    }

    pub fn record_drop(&mut self, rule: &str) {
        self.docs_in += 1;
        *self.docs_dropped_by_rule.entry(rule.to_string()).or_insert(0) += 1;
    }

    pub fn dropped(&self) -> usize {
        self.docs_dropped_by_rule.values().sum()
    }

    pub fn reconciles(&self) -> bool {
        self.docs_in == self.docs_out + self.dropped()
    }

    /// Associative merge of per-worker reports.
    pub fn merge(&mut self, other: &FilterReport) {
        self.docs_in += other.docs_in;
        self.docs_out += other.docs_out;
        for (k, v) in &other.docs_dropped_by_rule {
            *self.docs_dropped_by_rule.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.lines_dropped_by_rule {
            *self.lines_dropped_by_rule.entry(k.clone()).or_insert(0) += v;
        }
    }
}

/// Runs `verdict` over a batch, collecting survivors and a report.
pub fn apply<F>(docs: impl IntoIterator<Item = Document>, mut verdict: F) -> (Vec<Document>, FilterReport)
where
    F: FnMut(&Document) -> Verdict,
{
    let mut report = FilterReport::default();
    let mut kept = Vec::new();
    for doc in docs {
        let v = verdict(&doc);
        report.record(&v);
        if let Some(d) = v.into_doc() {
            kept.push(d);
        }
    }
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(content: &str) -> Document {
        Document::new("u", "s", content, "2024-12-31T00:00:00")
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("word{i}")).collect::<Vec<_>>().join(" ") + "."
    }

    #[test]
    fn javascript_line_removed() {
        let cfg = FilterConfig {
            min_doc_words: 2,
            ..Default::default()
        };
        let out = c4_filter(&doc("Enable javascript to view.\nReal content here."), &cfg).unwrap();
        assert_eq!(out.content, "Real content here.");
        match c4_verdict(&doc("Enable JavaScript.\nReal content here."), &cfg) {
            Verdict::Keep { lines_dropped, .. } => {
                assert_eq!(lines_dropped[rule::LINE_SUBSTRING], 1)
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn lorem_ipsum_drops_document() {
        let d = doc(&format!("{} Lorem Ipsum dolor sit amet", words(100)));
        assert_eq!(c4_verdict(&d, &FilterConfig::default()), Verdict::Drop(rule::DOC_SUBSTRING));
    }

    #[test]
    fn clean_doc_unchanged() {
        let d = doc(&words(100));
        assert_eq!(c4_filter(&d, &FilterConfig::default()).unwrap(), d);
    }

    #[test]
    fn short_doc_dropped() {
        assert_eq!(
            c4_verdict(&doc("too short."), &FilterConfig::default()),
            Verdict::Drop(rule::TOO_SHORT)
        );
    }

    #[test]
    fn optional_rules_default_off() {
        let text = format!("{}\nno punctuation here\ncode {{ x }}", words(60));
        let d = doc(&text);
        assert_eq!(c4_filter(&d, &FilterConfig::default()).unwrap(), d);

        let braces = FilterConfig {
            apply_curly_brace: true,
            ..Default::default()
        };
        assert_eq!(c4_verdict(&d, &braces), Verdict::Drop(rule::CURLY_BRACE));

        let punct = FilterConfig {
            apply_terminal_punct: true,
            ..Default::default()
        };
        assert_eq!(c4_filter(&d, &punct).unwrap().content, words(60));
    }

    #[test]
    fn heuristic_phrase() {
        let cfg = FilterConfig::default();
        assert!(heuristic_filter(&doc("Your download will begin in a few seconds..."), &cfg).is_none());
        let d = doc("Download our whitepaper");
        assert_eq!(heuristic_filter(&d, &cfg).unwrap(), d);
        let empty = FilterConfig {
            heuristic_doc_substrings: vec![],
            ..Default::default()
        };
        assert!(heuristic_filter(&doc("Your download will begin in a few seconds"), &empty).is_some());
    }

    #[test]
    fn score_length_window() {
        let cfg = FilterConfig {
            min_doc_chars: 500,
            score_window: Some((0.003, 0.98)),
            ..Default::default()
        };
        assert!(window_filter(0.5, 600, &cfg));
        assert!(!window_filter(0.5, 400, &cfg));
        assert!(!window_filter(0.99, 600, &cfg));
        assert!(!window_filter(0.003, 600, &cfg));
        let open = FilterConfig::default();
        assert!(window_filter(0.0, 1, &open));
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        let bad = FilterConfig {
            score_window: Some((0.5, 0.1)),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let upper = FilterConfig {
            drop_doc_substrings: vec!["Lorem".into()],
            ..Default::default()
        };
        assert!(upper.validate().is_err());
        let parsed: FilterConfig = toml::from_str("min_doc_words = 3\nscore_window = [0.003, 0.98]").unwrap();
        assert_eq!(parsed.min_doc_words, 3);
        assert_eq!(parsed.drop_doc_substrings, vec!["lorem ipsum"]);
    }

    fn arb_content() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                Just("javascript".to_string()),
                Just("cookie policy".to_string()),
                Just("\n".to_string()),
                Just("{".to_string()),
                Just("lorem ipsum".to_string()),
                "[a-z]{1,8}[.!?]?",
            ],
            0..80,
        )
        .prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn filters_are_idempotent(content in arb_content(), punct: bool, braces: bool, min in 0usize..20) {
            let cfg = FilterConfig {
                min_doc_words: min,
                apply_terminal_punct: punct,
                apply_curly_brace: braces,
                ..Default::default()
            };
            let d = doc(&content);
            if let Some(once) = c4_filter(&d, &cfg) {
                prop_assert!(whitespace_tokens(&once.content) <= whitespace_tokens(&d.content));
                prop_assert_eq!(&once.url, &d.url);
                prop_assert_eq!(&once.source, &d.source);
                prop_assert_eq!(&once.time, &d.time);
                prop_assert_eq!(c4_filter(&once, &cfg), Some(once.clone()));
            }
            let h = heuristic_filter(&d, &cfg);
            prop_assert_eq!(h.as_ref().and_then(|x| heuristic_filter(x, &cfg)), h.clone());
        }

        #[test]
        fn report_reconciles(contents in proptest::collection::vec(arb_content(), 0..30)) {
            let cfg = FilterConfig { min_doc_words: 5, ..Default::default() };
            let docs: Vec<_> = contents.iter().map(|c| doc(c)).collect();
            let (kept, report) = apply(docs.clone(), |d| c4_verdict(d, &cfg));
            prop_assert!(report.reconciles());
            prop_assert_eq!(report.docs_in, docs.len());
            prop_assert_eq!(report.docs_out, kept.len());
            let (a, mut ra) = apply(docs[..docs.len() / 2].to_vec(), |d| c4_verdict(d, &cfg));
            let (_, rb) = apply(docs[docs.len() / 2..].to_vec(), |d| c4_verdict(d, &cfg));
            ra.merge(&rb);
            prop_assert_eq!(ra, report);
            prop_assert!(a.len() <= kept.len());
        }
    }
}
