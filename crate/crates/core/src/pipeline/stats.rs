use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::tokenize::whitespace_tokens;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub samples: u64,
    pub tokens: u64,
    pub avg_tokens: f64,
}

impl SourceStats {
    fn add(&mut self, samples: u64, tokens: u64) {
        self.samples += samples;
        self.tokens += tokens;
        self.avg_tokens = if self.samples == 0 {
            0.0
        } else {
            self.tokens as f64 / self.samples as f64
        };
    }
}

/// Sample and whitespace-token counts, overall and per source label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub samples: u64,
    pub tokens: u64,
    pub avg_tokens: f64,
    pub per_source: BTreeMap<String, SourceStats>,
}

impl CorpusStats {
    pub fn add(&mut self, doc: &Document) {
        let tokens = whitespace_tokens(&doc.content) as u64;
        self.per_source
            .entry(doc.source.clone())
            .or_default()
            .add(1, tokens);
        self.bump(1, tokens);
    }

    fn bump(&mut self, samples: u64, tokens: u64) {
        let mut total = SourceStats {
            samples: self.samples,
            tokens: self.tokens,
            avg_tokens: 0.0,
        };
        total.add(samples, tokens);
        self.samples = total.samples;
        self.tokens = total.tokens;
        self.avg_tokens = total.avg_tokens;
    }

    pub fn merge(&mut self, other: &CorpusStats) {
        for (source, s) in &other.per_source {
            self.per_source
                .entry(source.clone())
                .or_default()
                .add(s.samples, s.tokens);
        }
        self.bump(other.samples, other.tokens);
    }
}

pub fn stats<'a>(docs: impl IntoIterator<Item = &'a Document>) -> CorpusStats {
    let mut s = CorpusStats::default();
    for d in docs {
        s.add(d);
    }
    s
}
