use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use corpusforge::corpus::{write_records, ChatSample, Document, JsonlReader, JsonlRecord, Role};
use corpusforge::curation::{
    augment_stream, builtin_judge_template, extract_answer, judge_filter, judge_sample,
    map_ordered, rejection_sample, AnsweredSample, AugmentConfig, ClientConfig, Completer,
    CompletionClient, JudgedSample, Style, StyleTemplate, Template,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ServiceArgs;
use crate::util::{emit, read_all, settings, warn_skipped};
use crate::Globals;

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Completion service as MODEL@URL; repeatable. One is picked at random
    /// per document.
    #[arg(long = "client", required = true)]
    clients: Vec<String>,
    /// Environment variable holding a bearer token for every client.
    #[arg(long)]
    api_key_env: Option<String>,
    /// Rewrite styles to draw from.
    #[arg(long, value_delimiter = ',', default_value = "blog,textbook,qa")]
    styles: Vec<Style>,
    /// Replacement prompt as STYLE=PATH; repeatable.
    #[arg(long = "template")]
    templates: Vec<String>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    error_budget: Option<usize>,
}

fn parse_client(spec: &str, api_key_env: &Option<String>) -> Result<CompletionClient> {
    let (model, url) = spec
        .split_once('@')
        .with_context(|| format!("expected MODEL@URL, got {spec:?}"))?;
    let mut cfg = ClientConfig::new(url, model);
    cfg.api_key_env = api_key_env.clone();
    Ok(CompletionClient::new(cfg)?)
}

pub fn augment(a: AugmentArgs, g: &Globals) -> Result<()> {
    let mut cfg: AugmentConfig = settings(g)?;
    cfg.seed = g.seed;
    if let Some(n) = a.concurrency {
        cfg.max_concurrency = n;
    }
    if let Some(n) = a.error_budget {
        cfg.error_budget = n;
    }
    let mut overrides: HashMap<Style, PathBuf> = HashMap::new();
    for t in &a.templates {
        let (style, path) = t
            .split_once('=')
            .with_context(|| format!("expected STYLE=PATH, got {t:?}"))?;
        overrides.insert(style.parse()?, PathBuf::from(path));
    }
    let templates = a
        .styles
        .iter()
        .map(|&style| match overrides.get(&style) {
            Some(p) => Ok(StyleTemplate {
                style,
                template: Template::load(p)?,
            }),
            None => Ok(StyleTemplate::builtin(style)),
        })
        .collect::<Result<Vec<_>>>()?;
    let clients = a
        .clients
        .iter()
        .map(|c| parse_client(c, &a.api_key_env))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&dyn Completer> = clients.iter().map(|c| c as &dyn Completer).collect();

    let mut reader = JsonlReader::<Document>::open(&a.input)?;
    let mut read_error = None;
    let docs = reader.by_ref().map_while(|r| match r {
        Ok(d) => Some(d),
        Err(e) => {
            read_error = Some(e);
            None
        }
    });
    let file = File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let mut w = BufWriter::new(file);
    let report = augment_stream(docs, &templates, &refs, &cfg, |d| {
        serde_json::to_writer(&mut w, &d)?;
        w.write_all(b"\n").map_err(|e| corpusforge::Error::Io {
            path: a.output.clone(),
            source: e,
        })
    })?;
    if let Some(e) = read_error {
        return Err(e.into());
    }
    w.flush()?;
    warn_skipped(&a.input, reader.skipped());
    emit(&report, g)
}

/// A chat sample with the task it belongs to.
#[derive(Debug, Deserialize)]
struct TaskSample {
    #[serde(flatten)]
    sample: ChatSample,
    #[serde(default)]
    task: String,
}

impl JsonlRecord for TaskSample {
    fn check(self) -> corpusforge::Result<Self> {
        self.sample.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// Already judged samples, or raw chat samples when a judge model is given.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 7)]
    min_score: u8,
    /// Samples kept per task.
    #[arg(long, default_value_t = 1000)]
    top_k: usize,
    /// Judge prompt with a {TEXT} slot.
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Where to save every judged sample before filtering.
    #[arg(long)]
    judged_output: Option<PathBuf>,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Serialize)]
struct JudgeReport {
    judged: usize,
    failed: Vec<JudgeFailure>,
    kept: usize,
}

#[derive(Serialize)]
struct JudgeFailure {
    prompt_id: String,
    reason: String,
}

pub fn judge(a: JudgeArgs, g: &Globals) -> Result<()> {
    let mut failed = Vec::new();
    let judged: Vec<JudgedSample> = match a.service.client()? {
        None => read_all::<JudgedSample>(&a.input)?.0,
        Some(client) => {
            let template = match &a.template {
                Some(p) => Template::load(p)?,
                None => builtin_judge_template(),
            };
            let (samples, _) = read_all::<TaskSample>(&a.input)?;
            let results = map_ordered(&samples, a.concurrency, |s| {
                judge_sample(&client, &template, s.sample.clone(), &s.task)
            });
            let mut out = Vec::new();
            for (s, r) in samples.iter().zip(results) {
                match r {
                    Ok(j) => out.push(j),
                    Err(e) => failed.push(JudgeFailure {
                        prompt_id: s.sample.prompt_id.clone(),
                        reason: e.to_string(),
                    }),
                }
            }
            out
        }
    };
    if let Some(p) = &a.judged_output {
        write_records(&judged, p)?;
    }
    let n = judged.len();
    let kept = judge_filter(judged, a.min_score, a.top_k)?;
    write_records(&kept, &a.output)?;
    emit(
        &JudgeReport {
            judged: n,
            failed,
            kept: kept.len(),
        },
        g,
    )
}

#[derive(Debug, Args)]
pub struct RejectArgs {
    /// Chat samples; `extracted_answer` is filled from the last assistant
    /// turn when absent.
    #[arg(long)]
    input: PathBuf,
    /// JSONL of {"prompt_id": .., "answer": ..}.
    #[arg(long)]
    answers: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Deserialize)]
struct KeyRow {
    prompt_id: String,
    answer: String,
}

impl JsonlRecord for KeyRow {}

#[derive(Serialize)]
struct RejectReport {
    #[serde(flatten)]
    report: corpusforge::curation::RejectionReport,
    no_answer: Vec<String>,
}

pub fn reject(a: RejectArgs, g: &Globals) -> Result<()> {
    let (rows, _) = read_all::<KeyRow>(&a.answers)?;
    let mut key = HashMap::new();
    for r in rows {
        if key.insert(r.prompt_id.clone(), r.answer).is_some() {
            bail!("answer key lists prompt_id {:?} twice", r.prompt_id);
        }
    }
    let (raw, _) = read_all::<Value>(&a.input)?;
    let mut samples = Vec::with_capacity(raw.len());
    let mut no_answer = Vec::new();
    for mut v in raw {
        if v.get("extracted_answer").is_none() {
            let sample: ChatSample = serde_json::from_value(v.clone())?;
            let last = sample
                .messages
                .iter()
                .rev()
                .find(|m| m.role == Role::Assistant)
                .and_then(|m| extract_answer(&m.content));
            match last {
                Some(ans) => {
                    v["extracted_answer"] = Value::String(ans);
                }
                None => {
                    no_answer.push(sample.prompt_id);
                    continue;
                }
            }
        }
        let s: AnsweredSample = serde_json::from_value(v)?;
        samples.push(s.check()?);
    }
    let (kept, report) = rejection_sample(samples, &key)?;
    eprint!("{}", report.table());
    write_records(&kept, &a.output)?;
    emit(&RejectReport { report, no_answer }, g)
}
