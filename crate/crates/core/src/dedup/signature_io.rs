//! Binary signature file: a header carrying the LSH config, then fixed-width
//! records. Little-endian.
//!
//! ```text
//! magic "CFMH" | version u32 | shingle_size u32 | num_hashes u32
//! num_bands u32 | rows_per_band u32 | seed u64 | count u64
//! count × (doc_id u64, num_hashes × u64)
//! ```

use std::io::{Read, Write};

use super::{LshConfig, MinHashSignature};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CFMH";
const VERSION: u32 = 1;

pub fn write_signatures<W: Write>(
    mut w: W,
    cfg: &LshConfig,
    sigs: &[MinHashSignature],
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    for v in [
        VERSION,
        cfg.shingle_size as u32,
        cfg.num_hashes as u32,
        cfg.num_bands as u32,
        cfg.rows_per_band as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&cfg.seed.to_le_bytes())?;
    w.write_all(&(sigs.len() as u64).to_le_bytes())?;
    for s in sigs {
        w.write_all(&s.doc_id.to_le_bytes())?;
        for v in &s.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_signatures<R: Read>(mut r: R) -> Result<(LshConfig, Vec<MinHashSignature>)> {
    let mut magic = [0u8; 4];
    fill(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a signature file".into()));
    }
    let version = u32_le(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported signature version {version}")));
    }
    let cfg = LshConfig {
        shingle_size: u32_le(&mut r)? as usize,
        num_hashes: u32_le(&mut r)? as usize,
        num_bands: u32_le(&mut r)? as usize,
        rows_per_band: u32_le(&mut r)? as usize,
        seed: u64_le(&mut r)?,
    };
    cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
    let count = u64_le(&mut r)? as usize;
    let mut sigs = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        let doc_id = u64_le(&mut r)?;
        let values = (0..cfg.num_hashes)
            .map(|_| u64_le(&mut r))
            .collect::<Result<_>>()?;
        sigs.push(MinHashSignature { doc_id, values });
    }
    Ok((cfg, sigs))
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated signature file: {e}")))
}

fn u32_le<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    fill(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn u64_le<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    fill(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}
