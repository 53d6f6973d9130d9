//! Single-file model container, little-endian throughout:
//!
//! ```text
//! magic "CFLM" | version u32 | order u32 | smoothing u8 | param f64 | floor f64
//! vocab_len u32 | vocab_len × (len u32, utf-8 bytes)        ids in order
//! for m in 1..=order:
//!   n_probs u64    | n_probs × (m × u32 ids, f64)           sorted by ids
//!   n_backoffs u64 | n_backoffs × (m × u32 ids, f64)        sorted by ids
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{NGramModel, Smoothing, Vocab};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CFLM";
const VERSION: u32 = 1;

impl NGramModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.order as u32).to_le_bytes())?;
        let (tag, param) = match self.smoothing {
            Smoothing::AddK { k } => (0u8, k),
            Smoothing::KneserNey { discount } => (1u8, discount),
        };
        w.write_all(&[tag])?;
        w.write_all(&param.to_le_bytes())?;
        w.write_all(&self.floor.to_le_bytes())?;
        w.write_all(&(self.vocab.tokens.len() as u32).to_le_bytes())?;
        for t in &self.vocab.tokens {
            w.write_all(&(t.len() as u32).to_le_bytes())?;
            w.write_all(t.as_bytes())?;
        }
        for m in 0..self.order {
            write_table(&mut w, &self.probs[m])?;
            write_table(&mut w, &self.backoffs[m])?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
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
            return Err(Error::Format("not a language model file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let order = read_u32(&mut r)? as usize;
        if order == 0 || order > 16 {
            return Err(Error::Format(format!("implausible order {order}")));
        }
        let mut tag = [0u8; 1];
        read_exact(&mut r, &mut tag)?;
        let param = read_f64(&mut r)?;
        let smoothing = match tag[0] {
            0 => Smoothing::AddK { k: param },
            1 => Smoothing::KneserNey { discount: param },
            t => return Err(Error::Format(format!("unknown smoothing tag {t}"))),
        };
        let floor = read_f64(&mut r)?;
        let n_vocab = read_u32(&mut r)? as usize;
        let mut tokens = Vec::with_capacity(n_vocab.min(1 << 20));
        for _ in 0..n_vocab {
            let len = read_u32(&mut r)? as usize;
            let mut bytes = vec![0u8; len];
            read_exact(&mut r, &mut bytes)?;
            tokens.push(
                String::from_utf8(bytes).map_err(|_| Error::Format("vocab entry is not utf-8".into()))?,
            );
        }
        if tokens.len() < 3 {
            return Err(Error::Format("vocabulary lacks reserved tokens".into()));
        }
        let mut probs = Vec::with_capacity(order);
        let mut backoffs = Vec::with_capacity(order);
        for m in 1..=order {
            probs.push(read_table(&mut r, m, n_vocab)?);
            backoffs.push(read_table(&mut r, m, n_vocab)?);
        }
        Ok(NGramModel {
            order,
            smoothing,
            vocab: Vocab::from_tokens(tokens),
            probs,
            backoffs,
            floor,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

fn write_table<W: Write>(w: &mut W, table: &HashMap<Vec<u32>, f64>) -> std::io::Result<()> {
    let mut entries: Vec<_> = table.iter().collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
    w.write_all(&(entries.len() as u64).to_le_bytes())?;
    for (ids, p) in entries {
        for id in ids {
            w.write_all(&id.to_le_bytes())?;
        }
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_table<R: Read>(r: &mut R, m: usize, n_vocab: usize) -> Result<HashMap<Vec<u32>, f64>> {
    let n = read_u64(r)? as usize;
    let mut table = HashMap::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let mut ids = Vec::with_capacity(m);
        for _ in 0..m {
            let id = read_u32(r)?;
            if id as usize >= n_vocab {
                return Err(Error::Format(format!("token id {id} out of range")));
            }
            ids.push(id);
        }
        table.insert(ids, read_f64(r)?);
    }
    Ok(table)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated model file: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}
