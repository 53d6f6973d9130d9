use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Completer, Template};
use crate::corpus::{ChatSample, JsonlRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedSample {
    #[serde(flatten)]
    pub sample: ChatSample,
    pub judge_score: u8,
    #[serde(default)]
    pub judge_rationale: String,
    /// Groups samples for the per-task `top_k` cut.
    #[serde(default)]
    pub task: String,
}

impl JsonlRecord for JudgedSample {
    fn check(self) -> Result<Self> {
        if !(1..=10).contains(&self.judge_score) {
            return Err(Error::invalid(format!(
                "judge_score {} outside 1..=10",
                self.judge_score
            )));
        }
        self.sample.validate()?;
        Ok(self)
    }
}

/// Keeps samples scoring at least `min_score`, best first, at most `top_k`
/// per task. Equal scores keep their input order. Tasks appear in the
/// output in order of first occurrence.
pub fn judge_filter<I>(samples: I, min_score: u8, top_k: usize) -> Result<Vec<JudgedSample>>
where
    I: IntoIterator<Item = JudgedSample>,
{
    if !(1..=10).contains(&min_score) || top_k == 0 {
        return Err(Error::config("min_score must be in 1..=10 and top_k ≥ 1"));
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_task: BTreeMap<String, Vec<JudgedSample>> = BTreeMap::new();
    for s in samples {
        if s.judge_score < min_score {
            continue;
        }
        if !by_task.contains_key(&s.task) {
            order.push(s.task.clone());
        }
        by_task.entry(s.task.clone()).or_default().push(s);
    }
    let mut out = Vec::new();
    for task in order {
        let mut group = by_task.remove(&task).unwrap();
        group.sort_by_key(|s| std::cmp::Reverse(s.judge_score));
        group.truncate(top_k);
        out.extend(group);
    }
    Ok(out)
}

/// Parses a judge reply: the last "Score: N" line gives the score and the
/// text before it the rationale.
pub fn parse_judgement(reply: &str) -> Result<(u8, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?im)^\W*score\W*:\W*(\d+)\b").unwrap());
    let m = re
        .captures_iter(reply)
        .last()
        .ok_or_else(|| Error::Completion("judge reply has no \"Score: N\" line".into()))?;
    let score: u8 = m[1]
        .parse()
        .map_err(|_| Error::Completion(format!("judge score {:?} is not a number", &m[1])))?;
    if !(1..=10).contains(&score) {
        return Err(Error::Completion(format!("judge score {score} outside 1..=10")));
    }
    let rationale = reply[..m.get(0).unwrap().start()].trim().to_string();
    Ok((score, rationale))
}

pub fn render_conversation(sample: &ChatSample) -> String {
    sample
        .messages
        .iter()
        .map(|m| {
            let who = match m.role {
                crate::corpus::Role::User => "User",
                crate::corpus::Role::Assistant => "Assistant",
            };
            format!("{who}: {}", m.content)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn judge_sample(
    judge: &dyn Completer,
    template: &Template,
    sample: ChatSample,
    task: &str,
) -> Result<JudgedSample> {
    let reply = judge.complete(&template.render(&render_conversation(&sample)))?;
    let (judge_score, judge_rationale) = parse_judgement(&reply)?;
    Ok(JudgedSample {
        sample,
        judge_score,
        judge_rationale,
        task: task.to_string(),
    })
}
