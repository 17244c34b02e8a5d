//! Fingerprint database file.
//!
//! ```text
//! "TCFDB001"
//! u32 q, r, m, n
//! u64 song_count, entry_count
//! song_count x { u32 id, f64 duration_s, [u8; 32] sha256, u32 title_len, title (UTF-8) }
//! entry_count x { u32 song, f64 t_s, u64 frame, u32 bin, f64 scale_s, u32 type,
//!                 u8 at_boundary, (q*r - 1) f64 descriptor }
//! ```
//!
//! All little-endian. Descriptors use the same coefficient order as the
//! dictionary file (`u` along chroma, `v` along time, `u*r + v`, DC dropped).

use std::path::Path;

use tchroma_core::{FeaturePoint, Fingerprint, FingerprintDb, SongId, SongMeta};

use crate::codec::{Reader, Writer};
use crate::error::{IoContext, Result};

pub const MAGIC: &str = "TCFDB001";

pub fn encode(db: &FingerprintDb) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC.as_bytes());
    for v in [db.q() as u32, db.r() as u32, db.m(), db.n()] {
        w.u32(v);
    }
    w.u64(db.songs().len() as u64);
    w.u64(db.len() as u64);
    for s in db.songs() {
        w.u32(s.id.0);
        w.f64(s.duration_s);
        w.bytes(&s.content_hash);
        w.u32(s.title.len() as u32);
        w.bytes(s.title.as_bytes());
    }
    for e in db.entries() {
        let p = &e.point;
        // entries in a db always carry their song
        w.u32(e.song_id.map_or(u32::MAX, |s| s.0));
        w.f64(p.t_s);
        w.u64(p.frame as u64);
        w.u32(p.bin as u32);
        w.f64(p.scale_s);
        w.u32(p.ptype as u32);
        w.u8(u8::from(p.at_boundary));
        e.desc.iter().for_each(|&x| w.f64(x));
    }
    w.buf
}

pub fn decode(bytes: &[u8]) -> Result<FingerprintDb> {
    let mut r = Reader::new(bytes, "fingerprint db file");
    r.magic(MAGIC)?;
    let (q, rr, m, n) = (r.u32()? as usize, r.u32()? as usize, r.u32()?, r.u32()?);
    let dim = (q * rr).checked_sub(1).ok_or_else(|| r.corrupt("q * r is zero"))?;
    let (n_songs, n_entries) = (r.usize()?, r.usize()?);
    r.expect_room(n_songs, 48)?;
    let mut songs = Vec::with_capacity(n_songs);
    for _ in 0..n_songs {
        let id = SongId(r.u32()?);
        let duration_s = r.f64()?;
        let content_hash: [u8; 32] = r.take(32)?.try_into().unwrap();
        let len = r.u32()? as usize;
        let title = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| r.corrupt("song title is not UTF-8"))?;
        songs.push(SongMeta { id, title, duration_s, content_hash });
    }
    r.expect_room(n_entries, 37 + 8 * dim)?;
    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let song = SongId(r.u32()?);
        let t_s = r.f64()?;
        let frame = r.usize()?;
        let bin = r.u32()? as usize;
        let scale_s = r.f64()?;
        let ptype = r.u32()? as usize;
        let at_boundary = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(r.corrupt(format!("boundary flag {b}"))),
        };
        let desc = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        entries.push(Fingerprint {
            desc,
            point: FeaturePoint { t_s, frame, bin, scale_s, ptype, at_boundary },
            song_id: Some(song),
        });
    }
    r.finish()?;
    Ok(FingerprintDb::from_parts(q, rr, m, n, songs, entries)?)
}

pub fn save(path: &Path, db: &FingerprintDb) -> Result<()> {
    crate::write_atomic(path, &encode(db))
}

pub fn load(path: &Path) -> Result<FingerprintDb> {
    decode(&std::fs::read(path).at(path)?)
}
