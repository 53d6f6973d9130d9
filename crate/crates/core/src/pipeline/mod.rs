//! Config-driven batch pipeline chaining filters, scoring and dedup.
//!
//! Streaming stages run chunk by chunk; a dedup stage is a barrier that
//! collects everything upstream before clustering. Output and report are
//! written to `.partial` files and renamed only when the run succeeds.

mod config;
mod stats;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, JsonlReader, JsonlRecord, LineError};
use crate::dedup::{cluster_documents, keep_mask, DedupReport};
use crate::error::{Error, Result};
use crate::filters::{c4_verdict, heuristic_verdict, rule, window_filter, FilterReport, Verdict};
use crate::lm::lm_verdict;

pub use config::{IoConfig, PipelineConfig, StageKind, StageSpec, CONFIG_VERSION};
use config::Stage;
pub use stats::{stats, CorpusStats, SourceStats};

const CHUNK: usize = 4096;

/// A document travelling through the pipeline, with the relevance score
/// attached by a classify stage (or already present in the input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDoc {
    #[serde(flatten)]
    pub doc: Document,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl JsonlRecord for PipelineDoc {
    fn check(self) -> Result<Self> {
        Ok(PipelineDoc {
            doc: self.doc.validated()?,
            score: self.score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub kind: StageKind,
    pub docs_in: u64,
    pub docs_out: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup: Option<DedupReport>,
}

/// Everything a run produced except the documents. Holds no paths or
/// timings so identical runs give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub input: CorpusStats,
    pub output: CorpusStats,
    pub stages: Vec<StageReport>,
    pub skipped_lines: Vec<LineError>,
}

fn partial_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

struct StageState<'a> {
    spec: &'a StageSpec,
    stage: Stage,
    report: StageReport,
}

impl StageState<'_> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Stage {
            stage: self.spec.name.clone(),
            message: message.into(),
        }
    }

    fn record_counts(&mut self, before: &CorpusStats, after: &CorpusStats) {
        self.report.docs_in += before.samples;
        self.report.tokens_in += before.tokens;
        self.report.docs_out += after.samples;
        self.report.tokens_out += after.tokens;
    }

    /// Runs a streaming stage over one chunk.
    fn run_chunk(&mut self, chunk: Vec<PipelineDoc>) -> Result<Vec<PipelineDoc>> {
        let before = stats(chunk.iter().map(|d| &d.doc));
        let verdicts: Vec<(Verdict, Option<f64>)> = match &self.stage {
            Stage::C4(cfg) => chunk
                .par_iter()
                .map(|d| (c4_verdict(&d.doc, cfg), d.score))
                .collect(),
            Stage::Heuristic(cfg) => chunk
                .par_iter()
                .map(|d| (heuristic_verdict(&d.doc, cfg), d.score))
                .collect(),
            Stage::Lm(model, thresholds) => chunk
                .par_iter()
                .map(|d| lm_verdict(&d.doc, model, thresholds).map(|v| (v, d.score)))
                .collect::<Result<_>>()
                .map_err(|e| self.fail(e.to_string()))?,
            Stage::Window(cfg) => {
                if let Some(d) = chunk.iter().find(|d| d.score.is_none()) {
                    return Err(self.fail(format!("document {} has no score", d.doc.url)));
                }
                chunk
                    .iter()
                    .map(|d| {
                        let score = d.score.unwrap_or_default();
                        let v = if window_filter(score, d.doc.content.chars().count(), cfg) {
                            keep(d.doc.clone())
                        } else {
                            Verdict::Drop(rule::WINDOW)
                        };
                        (v, d.score)
                    })
                    .collect()
            }
            Stage::Classify(model, threshold) => chunk
                .par_iter()
                .map(|d| {
                    let s = model.score_document(&d.doc);
                    let v = match threshold {
                        Some(t) if s.score <= *t => Verdict::Drop(CLASSIFY_RULE),
                        _ => keep(s.doc),
                    };
                    (v, Some(s.score))
                })
                .collect(),
            Stage::Dedup(..) => unreachable!("dedup is a barrier stage"),
        };
        let report = self.report.filter.get_or_insert_with(FilterReport::default);
        let mut out = Vec::with_capacity(verdicts.len());
        for (v, score) in verdicts {
            report.record(&v);
            if let Some(doc) = v.into_doc() {
                out.push(PipelineDoc { doc, score });
            }
        }
        let after = stats(out.iter().map(|d| &d.doc));
        self.record_counts(&before, &after);
        Ok(out)
    }

    fn run_barrier(&mut self, docs: Vec<PipelineDoc>) -> Result<Vec<PipelineDoc>> {
        let Stage::Dedup(cfg, scope) = &self.stage else {
            unreachable!("only dedup is a barrier stage")
        };
        let plain: Vec<Document> = docs.iter().map(|d| d.doc.clone()).collect();
        let mut clusters =
            cluster_documents(&plain, cfg, *scope).map_err(|e| self.fail(e.to_string()))?;
        let keep = keep_mask(&mut clusters, plain.len());
        let n_clusters = clusters.clusters().len();
        self.report.dedup = Some(DedupReport::from_mask(&plain, &keep, n_clusters));
        let before = stats(&plain);
        let out: Vec<PipelineDoc> = docs
            .into_iter()
            .zip(&keep)
            .filter_map(|(d, &k)| k.then_some(d))
            .collect();
        let after = stats(out.iter().map(|d| &d.doc));
        self.record_counts(&before, &after);
        Ok(out)
    }
}

const CLASSIFY_RULE: &str = "below_threshold";

fn keep(doc: Document) -> Verdict {
    Verdict::Keep {
        doc,
        lines_dropped: Default::default(),
    }
}

/// Runs the configured stages over the input and writes output and report.
pub fn run(cfg: &PipelineConfig) -> Result<RunReport> {
    let stages = cfg.build()?;
    let mut states: Vec<StageState> = cfg
        .stages
        .iter()
        .zip(stages)
        .map(|(spec, stage)| StageState {
            spec,
            stage,
            report: StageReport {
                name: spec.name.clone(),
                kind: spec.kind,
                docs_in: 0,
                docs_out: 0,
                tokens_in: 0,
                tokens_out: 0,
                filter: None,
                dedup: None,
            },
        })
        .collect();

    let out_partial = partial_path(&cfg.io.output);
    let file = File::create(&out_partial).map_err(|e| Error::io(&out_partial, e))?;
    let mut writer = BufWriter::new(file);
    let mut written = 0usize;
    let mut output_stats = CorpusStats::default();
    let mut input_stats = CorpusStats::default();

    let mut reader = JsonlReader::<PipelineDoc>::open(&cfg.io.input)?;
    let mut first = true;
    let mut collected: Vec<PipelineDoc> = Vec::new();
    let mut start = 0;
    loop {
        let end = states[start..]
            .iter()
            .position(|s| s.stage.is_barrier())
            .map_or(states.len(), |p| start + p);
        let mut buffer = Vec::new();
        let mut pending = std::mem::take(&mut collected).into_iter();
        loop {
            let chunk: Vec<PipelineDoc> = if first {
                let mut c = Vec::with_capacity(CHUNK);
                for r in reader.by_ref().take(CHUNK) {
                    let d = r?;
                    input_stats.add(&d.doc);
                    c.push(d);
                }
                c
            } else {
                pending.by_ref().take(CHUNK).collect()
            };
            if chunk.is_empty() {
                break;
            }
            let mut chunk = chunk;
            for state in &mut states[start..end] {
                chunk = state.run_chunk(chunk)?;
            }
            if end == states.len() {
                for d in &chunk {
                    output_stats.add(&d.doc);
                    serde_json::to_writer(&mut writer, d)?;
                    writer.write_all(b"\n").map_err(|e| Error::PartialWrite {
                        path: out_partial.clone(),
                        written,
                        source: e,
                    })?;
                    written += 1;
                }
            } else {
                buffer.extend(chunk);
            }
        }
        first = false;
        if end == states.len() {
            break;
        }
        collected = states[end].run_barrier(buffer)?;
        start = end + 1;
    }
    writer.flush().map_err(|e| Error::PartialWrite {
        path: out_partial.clone(),
        written,
        source: e,
    })?;
    drop(writer);

    let report = RunReport {
        seed: cfg.seed,
        input: input_stats,
        output: output_stats,
        stages: states.into_iter().map(|s| s.report).collect(),
        skipped_lines: reader.into_skipped(),
    };
    let report_partial = partial_path(&cfg.io.report);
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&report_partial, json + "\n").map_err(|e| Error::io(&report_partial, e))?;
    std::fs::rename(&out_partial, &cfg.io.output).map_err(|e| Error::io(&cfg.io.output, e))?;
    std::fs::rename(&report_partial, &cfg.io.report).map_err(|e| Error::io(&cfg.io.report, e))?;
    Ok(report)
}
