//! Pattern dictionary file.
//!
//! ```text
//! "TCDICT01"
//! u32 c, q, r, m, n, w_t_ms, w_p
//! c * (q*r - 1) f64 descriptors
//! ```
//!
//! All little-endian. Descriptor coefficients are the `q x r` DCT block
//! with `u` along chroma and `v` along time, flattened `u*r + v`, DC dropped.

use std::path::Path;

use tchroma_core::PatternDictionary;

use crate::codec::{Reader, Writer};
use crate::error::{IoContext, Result};

pub const MAGIC: &str = "TCDICT01";

pub fn encode(dict: &PatternDictionary) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC.as_bytes());
    for v in [dict.len(), dict.q(), dict.r(), dict.m() as usize, dict.n() as usize, dict.w_t_ms() as usize, dict.w_p()]
    {
        w.u32(v as u32);
    }
    for p in dict.patterns() {
        p.iter().for_each(|&x| w.f64(x));
    }
    w.buf
}

pub fn decode(bytes: &[u8]) -> Result<PatternDictionary> {
    let mut r = Reader::new(bytes, "dictionary file");
    r.magic(MAGIC)?;
    let mut h = [0usize; 7];
    for v in &mut h {
        *v = r.u32()? as usize;
    }
    let [c, q, rr, m, n, w_t_ms, w_p] = h;
    let dim = (q * rr).checked_sub(1).ok_or_else(|| r.corrupt("q * r is zero"))?;
    r.expect_room(c, dim * 8)?;
    let mut patterns = Vec::with_capacity(c);
    for _ in 0..c {
        patterns.push((0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
    }
    r.finish()?;
    Ok(PatternDictionary::new(patterns, q, rr, m as u32, n as u32, w_t_ms as u32, w_p)?)
}

pub fn save(path: &Path, dict: &PatternDictionary) -> Result<()> {
    crate::write_atomic(path, &encode(dict))
}

pub fn load(path: &Path) -> Result<PatternDictionary> {
    decode(&std::fs::read(path).at(path)?)
}
