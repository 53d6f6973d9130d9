//! Corpus records, JSONL I/O, HTML to Markdown conversion and category graph
//! expansion.

mod category;
mod document;
mod html;
mod jsonl;

pub use category::{expand_categories, CategoryGraph};
pub use document::{normalize_time, ChatMessage, ChatSample, Document, Role};
pub use html::html_to_markdown;
pub use jsonl::{
    read_chat_jsonl, read_jsonl, read_records, write_jsonl, write_records, JsonlReader,
    JsonlRecord, LineError, ReadOutcome,
};
