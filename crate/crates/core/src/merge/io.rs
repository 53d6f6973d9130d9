//! Directory container: `manifest.json` maps each parameter name to
//! `{length, dtype: "f32", file}`; the reserved key `__metadata__` holds a
//! string map. Each file is raw little-endian f32.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};

use super::ParameterMap;
use crate::error::{Error, Result};

const MANIFEST: &str = "manifest.json";
const METADATA_KEY: &str = "__metadata__";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    length: usize,
    dtype: String,
    file: String,
}

fn file_name(index: usize, name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    format!("{index:05}_{safe}.f32")
}

impl ParameterMap {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        if self.entries.contains_key(METADATA_KEY) {
            return Err(Error::invalid(format!("{METADATA_KEY} is a reserved parameter name")));
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = serde_json::Map::new();
        manifest.insert(METADATA_KEY.into(), serde_json::to_value(&self.metadata)?);
        for (i, (name, xs)) in self.entries.iter().enumerate() {
            let file = file_name(i, name);
            let bytes: Vec<u8> = xs.iter().flat_map(|x| x.to_le_bytes()).collect();
            let path = dir.join(&file);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            let entry = Entry {
                length: xs.len(),
                dtype: "f32".into(),
                file,
            };
            manifest.insert(name.clone(), serde_json::to_value(entry)?);
        }
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text)?;
        let metadata = match raw.remove(METADATA_KEY) {
            Some(v) => serde_json::from_value(v)?,
            None => BTreeMap::new(),
        };
        let mut entries = BTreeMap::new();
        for (name, v) in raw {
            let entry: Entry = serde_json::from_value(v)
                .map_err(|e| Error::Format(format!("manifest entry {name:?}: {e}")))?;
            if entry.dtype != "f32" {
                return Err(Error::Format(format!(
                    "parameter {name:?} has dtype {:?}; only f32 is supported",
                    entry.dtype
                )));
            }
            let rel = Path::new(&entry.file);
            if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
                return Err(Error::Format(format!(
                    "parameter {name:?} points outside the directory: {}",
                    entry.file
                )));
            }
            let file = dir.join(rel);
            let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
            if bytes.len() != entry.length * 4 {
                return Err(Error::Format(format!(
                    "parameter {name:?}: expected {} bytes, found {}",
                    entry.length * 4,
                    bytes.len()
                )));
            }
            let xs = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.insert(name, xs);
        }
        let map = ParameterMap { entries, metadata };
        map.check_finite()?;
        Ok(map)
    }
}
