//! Model file, little-endian:
//!
//! ```text
//! magic "CFLC" | version u32 | feature_dim u32 | max_ngram u8 | hash_seed u64
//! feature_dim × f32 weights | bias f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureConfig, LinearClassifier};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CFLC";
const VERSION: u32 = 1;

impl LinearClassifier {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.features.feature_dim.to_le_bytes())?;
        w.write_all(&[self.features.max_ngram])?;
        w.write_all(&self.features.hash_seed.to_le_bytes())?;
        for x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&self.bias.to_le_bytes())?;
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a classifier model file".into()));
        }
        let mut b4 = [0u8; 4];
        read_exact(&mut r, &mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported classifier version {version}")));
        }
        read_exact(&mut r, &mut b4)?;
        let feature_dim = u32::from_le_bytes(b4);
        let mut b1 = [0u8; 1];
        read_exact(&mut r, &mut b1)?;
        let mut b8 = [0u8; 8];
        read_exact(&mut r, &mut b8)?;
        let features = FeatureConfig {
            feature_dim,
            max_ngram: b1[0],
            hash_seed: u64::from_le_bytes(b8),
        };
        features
            .validate()
            .map_err(|e| Error::Format(format!("bad classifier header: {e}")))?;
        let mut raw = vec![0u8; feature_dim as usize * 4];
        read_exact(&mut r, &mut raw)?;
        let weights = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        read_exact(&mut r, &mut b4)?;
        let bias = f32::from_le_bytes(b4);
        if r.read(&mut b1).map_err(|e| Error::Format(e.to_string()))? != 0 {
            return Err(Error::Format("trailing bytes after classifier model".into()));
        }
        Ok(LinearClassifier {
            features,
            weights,
            bias,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated classifier file: {e}")))
}
