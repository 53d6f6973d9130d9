use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "{TEXT}";

/// Prompt text with exactly one `{TEXT}` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    before: String,
    after: String,
}

impl Template {
    pub fn new(text: &str) -> Result<Self> {
        match text.matches(PLACEHOLDER).count() {
            1 => {
                let (before, after) = text.split_once(PLACEHOLDER).unwrap();
                Ok(Template {
                    before: before.to_string(),
                    after: after.to_string(),
                })
            }
            n => Err(Error::config(format!(
                "template must contain {PLACEHOLDER} exactly once, found {n}"
            ))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Substitutes `text` at the slot. Braces inside `text` are left alone.
    pub fn render(&self, text: &str) -> String {
        let mut out = String::with_capacity(self.before.len() + text.len() + self.after.len());
        out.push_str(&self.before);
        out.push_str(text);
        out.push_str(&self.after);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Blog,
    Textbook,
    Qa,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Blog, Style::Textbook, Style::Qa];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::Blog => "blog",
            Style::Textbook => "textbook",
            Style::Qa => "qa",
        }
    }
}

impl std::str::FromStr for Style {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blog" => Ok(Style::Blog),
            "textbook" => Ok(Style::Textbook),
            "qa" => Ok(Style::Qa),
            other => Err(Error::config(format!("unknown style {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StyleTemplate {
    pub style: Style,
    pub template: Template,
}

impl StyleTemplate {
    pub fn new(style: Style, text: &str) -> Result<Self> {
        Ok(StyleTemplate {
            style,
            template: Template::new(text)?,
        })
    }

    /// The rewrite prompt shipped with the crate for `style`.
    pub fn builtin(style: Style) -> Self {
        let text = match style {
            Style::Blog => include_str!("../../templates/rewrite_blog.txt"),
            Style::Textbook => include_str!("../../templates/rewrite_textbook.txt"),
            Style::Qa => include_str!("../../templates/rewrite_qa.txt"),
        };
        Self::new(style, text).expect("bundled templates are valid")
    }
}

pub fn builtin_judge_template() -> Template {
    Template::new(include_str!("../../templates/judge.txt")).expect("bundled template is valid")
}

pub fn builtin_relevance_template() -> Template {
    Template::new(include_str!("../../templates/relevance.txt")).expect("bundled template is valid")
}

pub fn render_rewrite_prompt(content: &str, tpl: &StyleTemplate) -> Result<String> {
    if content.trim().is_empty() {
        return Err(Error::Empty("cannot rewrite an empty document".into()));
    }
    Ok(tpl.template.render(content))
}
