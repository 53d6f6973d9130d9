use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::document::{check_unique_ids, ChatSample, Document};
use crate::error::{Error, Result};

/// A malformed input line that was skipped.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Records read from a file plus the lines that were skipped.
#[derive(Debug, Clone)]
pub struct ReadOutcome<T> {
    pub records: Vec<T>,
    pub skipped: Vec<LineError>,
}

impl<T> ReadOutcome<T> {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

/// Record types that can be checked after deserialization.
pub trait JsonlRecord: DeserializeOwned + Sized {
    fn check(self) -> Result<Self> {
        Ok(self)
    }
}

impl JsonlRecord for Document {
    fn check(self) -> Result<Self> {
        self.validated()
    }
}

impl JsonlRecord for ChatSample {
    fn check(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

impl JsonlRecord for serde_json::Value {}

/// Streaming JSONL reader. Malformed lines are skipped and recorded; only
/// I/O failures are surfaced as errors.
pub struct JsonlReader<T, R = BufReader<File>> {
    reader: R,
    path: PathBuf,
    line_no: usize,
    buf: String,
    skipped: Vec<LineError>,
    _marker: PhantomData<T>,
}

impl<T: JsonlRecord> JsonlReader<T> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_reader(BufReader::new(file), path))
    }
}

impl<T: JsonlRecord, R: BufRead> JsonlReader<T, R> {
    pub fn from_reader(reader: R, label: impl Into<PathBuf>) -> Self {
        JsonlReader {
            reader,
            path: label.into(),
            line_no: 0,
            buf: String::new(),
            skipped: Vec::new(),
            _marker: PhantomData,
        }
    }

    pub fn skipped(&self) -> &[LineError] {
        &self.skipped
    }

    pub fn into_skipped(self) -> Vec<LineError> {
        self.skipped
    }
}

impl<T: JsonlRecord, R: BufRead> Iterator for JsonlReader<T, R> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<T>(line)
                .map_err(|e| e.to_string())
                .and_then(|r| r.check().map_err(|e| e.to_string()));
            match parsed {
                Ok(r) => return Some(Ok(r)),
                Err(message) => self.skipped.push(LineError {
                    line: self.line_no,
                    message,
                }),
            }
        }
    }
}

/// Reads every valid record in `path`.
pub fn read_records<T: JsonlRecord>(path: impl AsRef<Path>) -> Result<ReadOutcome<T>> {
    let mut reader = JsonlReader::<T>::open(path)?;
    let mut records = Vec::new();
    for r in reader.by_ref() {
        records.push(r?);
    }
    Ok(ReadOutcome {
        records,
        skipped: reader.into_skipped(),
    })
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<ReadOutcome<Document>> {
    read_records(path)
}

/// Reads chat samples; prompt_id must be unique within the file.
pub fn read_chat_jsonl(path: impl AsRef<Path>) -> Result<ReadOutcome<ChatSample>> {
    let out = read_records::<ChatSample>(path)?;
    check_unique_ids(out.records.iter().map(|s| s.prompt_id.as_str()))?;
    Ok(out)
}

/// Writes records as one JSON object per line and returns the count written.
pub fn write_records<T, I>(records: I, path: impl AsRef<Path>) -> Result<usize>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut written = 0;
    let fail = |written, source| Error::PartialWrite {
        path: path.to_path_buf(),
        written,
        source,
    };
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n").map_err(|e| fail(written, e))?;
        written += 1;
    }
    w.flush().map_err(|e| fail(written, e))?;
    Ok(written)
}

pub fn write_jsonl<'a, I>(docs: I, path: impl AsRef<Path>) -> Result<usize>
where
    I: IntoIterator<Item = &'a Document>,
{
    write_records(docs, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn reader(text: &str) -> JsonlReader<Document, Cursor<Vec<u8>>> {
        JsonlReader::from_reader(Cursor::new(text.as_bytes().to_vec()), "mem")
    }

    #[test]
    fn reads_and_normalizes() {
        let text = r#"{"url":"u","source":"s","content":"hi","time":"2024-12-31T00:00:00"}
{"url":"u","source":"s","content":"hi","time":"2024"}
"#;
        let docs: Vec<_> = reader(text).map(|r| r.unwrap()).collect();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0], Document::new("u", "s", "hi", "2024-12-31T00:00:00"));
        assert_eq!(docs[1].time, "2024-12-31T00:00:00");
    }

    #[test]
    fn malformed_lines_are_skipped_with_line_numbers() {
        let text = r#"{"url":"a","source":"s","content":"x","time":"2024"}
{"url":"b","source":"s","content":"y","time":"2024"}
not json
{"url":"c","source":"s","content":"z","time":"2024"}
"#;
        let mut r = reader(text);
        let docs: Vec<_> = r.by_ref().map(|d| d.unwrap()).collect();
        assert_eq!(docs.len(), 3);
        assert_eq!(r.skipped().len(), 1);
        assert_eq!(r.skipped()[0].line, 3);
    }

    #[test]
    fn missing_file_is_fatal() {
        assert!(matches!(
            read_jsonl("/nonexistent/x.jsonl"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn empty_write_and_escaping() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.jsonl");
        assert_eq!(write_jsonl(&[], &p).unwrap(), 0);
        assert_eq!(std::fs::read(&p).unwrap().len(), 0);

        let docs = vec![
            Document::new("u1", "s", "line one\nline \"two\"", "2024-12-31T00:00:00"),
            Document::new("u2", "s", "x", "2023-12-31T00:00:00"),
        ];
        assert_eq!(write_jsonl(&docs, &p).unwrap(), 2);
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_jsonl(&p).unwrap().records, docs);
    }

    #[test]
    fn chat_ids_must_be_unique() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("chat.jsonl");
        let line = r#"{"messages":[{"role":"user","content":"q"},{"role":"assistant","content":"a"}],"prompt":"q","prompt_id":"p1"}"#;
        std::fs::write(&p, format!("{line}\n")).unwrap();
        assert_eq!(read_chat_jsonl(&p).unwrap().records.len(), 1);
        std::fs::write(&p, format!("{line}\n{line}\n")).unwrap();
        assert!(read_chat_jsonl(&p).is_err());
    }
}
