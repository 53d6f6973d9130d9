use std::collections::HashSet;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub url: String,
    pub source: String,
    pub content: String,
    pub time: String,
}

impl Document {
    pub fn new(
        url: impl Into<String>,
        source: impl Into<String>,
        content: impl Into<String>,
        time: impl Into<String>,
    ) -> Self {
        Document {
            url: url.into(),
            source: source.into(),
            content: content.into(),
            time: time.into(),
        }
    }

    /// Checks ingestion invariants and normalizes year-only timestamps.
    pub fn validated(mut self) -> Result<Self> {
        if self.content.trim().is_empty() {
            return Err(Error::invalid("empty content"));
        }
        self.time = normalize_time(&self.time)?;
        Ok(self)
    }
}

/// Normalizes an ISO 8601 timestamp. A bare four-digit year gets
/// `-12-31T00:00:00` appended; anything else must already parse.
pub fn normalize_time(raw: &str) -> Result<String> {
    let t = raw.trim();
    if t.len() == 4 && t.bytes().all(|b| b.is_ascii_digit()) {
        return Ok(format!("{t}-12-31T00:00:00"));
    }
    let ok = NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S").is_ok()
        || NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S%.f").is_ok()
        || DateTime::parse_from_rfc3339(t).is_ok()
        || NaiveDate::parse_from_str(t, "%Y-%m-%d").is_ok();
    if ok {
        Ok(t.to_string())
    } else {
        Err(Error::invalid(format!("time {raw:?} is not ISO 8601")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// A conversation sample in alternating user/assistant form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSample {
    pub messages: Vec<ChatMessage>,
    pub prompt: String,
    pub prompt_id: String,
}

impl ChatSample {
    pub fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::invalid(format!("sample {}: no messages", self.prompt_id)));
        }
        for (i, m) in self.messages.iter().enumerate() {
            let want = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if m.role != want {
                return Err(Error::invalid(format!(
                    "sample {}: message {i} has role {:?}, expected {:?}",
                    self.prompt_id, m.role, want
                )));
            }
        }
        if self.prompt != self.messages[0].content {
            return Err(Error::invalid(format!(
                "sample {}: prompt differs from the first message",
                self.prompt_id
            )));
        }
        Ok(())
    }

    /// All message contents joined by a single space.
    pub fn concatenated(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Fails on the first repeated prompt_id.
pub(crate) fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::invalid(format!("duplicate prompt_id {id:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_only_time_is_padded() {
        assert_eq!(normalize_time("2024").unwrap(), "2024-12-31T00:00:00");
        assert_eq!(
            normalize_time("2024-12-31T00:00:00").unwrap(),
            "2024-12-31T00:00:00"
        );
        assert!(normalize_time("2024-05-06T10:00:00Z").is_ok());
        assert!(normalize_time("yesterday").is_err());
        assert!(normalize_time("24").is_err());
    }

    #[test]
    fn empty_content_rejected() {
        let d = Document::new("u", "s", "  ", "2024");
        assert!(d.validated().is_err());
    }

    fn msg(role: Role, c: &str) -> ChatMessage {
        ChatMessage {
            role,
            content: c.into(),
        }
    }

    #[test]
    fn chat_sample_alternation() {
        let good = ChatSample {
            messages: vec![msg(Role::User, "q"), msg(Role::Assistant, "a")],
            prompt: "q".into(),
            prompt_id: "1".into(),
        };
        good.validate().unwrap();
        assert_eq!(good.concatenated(), "q a");

        let mut bad = good.clone();
        bad.messages.swap(0, 1);
        assert!(bad.validate().is_err());

        let mut bad_prompt = good.clone();
        bad_prompt.prompt = "other".into();
        assert!(bad_prompt.validate().is_err());
    }

    #[test]
    fn unique_ids() {
        assert!(check_unique_ids(["a", "b"]).is_ok());
        assert!(check_unique_ids(["a", "b", "a"]).is_err());
    }
}
