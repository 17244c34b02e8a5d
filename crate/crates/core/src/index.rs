//! Reference fingerprint store and nearest-neighbour matching under the
//! angular ratio test.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Fingerprint, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SongId(pub u32);

impl fmt::Display for SongId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SongMeta {
    pub id: SongId,
    pub title: String,
    pub duration_s: f64,
    /// Content hash of the source file, used to make ingestion idempotent.
    pub content_hash: [u8; 32],
}

/// Flat fingerprint store searched by exhaustive scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDb {
    q: usize,
    r: usize,
    m: u32,
    n: u32,
    songs: Vec<SongMeta>,
    entries: Vec<Fingerprint>,
}

impl FingerprintDb {
    pub fn new(q: usize, r: usize, m: u32, n: u32) -> Self {
        FingerprintDb { q, r, m, n, songs: Vec::new(), entries: Vec::new() }
    }

    /// Rebuild from stored parts; used by the file loader.
    pub fn from_parts(
        q: usize,
        r: usize,
        m: u32,
        n: u32,
        songs: Vec<SongMeta>,
        entries: Vec<Fingerprint>,
    ) -> Result<Self> {
        let mut db = FingerprintDb::new(q, r, m, n);
        for s in &songs {
            if db.song(s.id).is_some() {
                return Err(Error::DuplicateSongId(s.id));
            }
            db.songs.push(s.clone());
        }
        for e in &entries {
            db.check_descriptor(&e.desc)?;
            match e.song_id {
                Some(id) if db.song(id).is_some() => {}
                _ => return Err(Error::InvalidParameter("entry refers to an unknown song")),
            }
        }
        db.entries = entries;
        Ok(db)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.q * self.r - 1
    }

    pub fn songs(&self) -> &[SongMeta] {
        &self.songs
    }

    pub fn song(&self, id: SongId) -> Option<&SongMeta> {
        self.songs.iter().find(|s| s.id == id)
    }

    pub fn entries(&self) -> &[Fingerprint] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest id not yet used, for dense assignment.
    pub fn next_song_id(&self) -> SongId {
        SongId(self.songs.iter().map(|s| s.id.0 + 1).max().unwrap_or(0))
    }

    pub fn find_by_hash(&self, hash: &[u8; 32]) -> Option<&SongMeta> {
        self.songs.iter().find(|s| &s.content_hash == hash)
    }

    fn check_descriptor(&self, desc: &[f64]) -> Result<()> {
        if desc.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: desc.len() });
        }
        let mean = desc.iter().sum::<f64>() / desc.len() as f64;
        let norm = libm::sqrt(desc.iter().map(|x| x * x).sum::<f64>());
        if !(mean.abs() < 1e-9 && (norm - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidParameter("descriptor is not zero-mean unit-norm"));
        }
        Ok(())
    }

    /// Append a song's fingerprints, tagging each with the song id.
    pub fn add_song(&mut self, meta: SongMeta, fps: Vec<Fingerprint>) -> Result<()> {
        if self.song(meta.id).is_some() {
            return Err(Error::DuplicateSongId(meta.id));
        }
        for fp in &fps {
            self.check_descriptor(&fp.desc)?;
        }
        let id = meta.id;
        self.songs.push(meta);
        self.entries.extend(fps.into_iter().map(|mut fp| {
            fp.song_id = Some(id);
            fp
        }));
        Ok(())
    }
}

/// How the runner-up for the ratio test is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Runner-up is the nearest entry from a different song than the
    /// nearest one. Repeated motifs inside one song do not veto a match.
    #[default]
    CrossSong,
    /// Runner-up is the nearest entry other than the nearest one.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub alpha: f64,
    /// Absolute gate on the nearest angle, radians.
    pub theta_max: f64,
    pub mode: MatchMode,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams { alpha: 0.6, theta_max: 0.4, mode: MatchMode::CrossSong }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    /// Index into the query fingerprint list.
    pub query: usize,
    /// Index into [`FingerprintDb::entries`].
    pub entry: usize,
    /// Angle to the matched entry, radians.
    pub angle: f64,
}

/// Angle between two unit vectors.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    libm::acos(dot(a, b).clamp(-1.0, 1.0))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // eight independent accumulators hide the add latency
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        sum += x * y;
    }
    sum
}

/// Nearest entry and runner-up (by largest dot product) for one query.
/// Ties go to the entry with the smaller `(song, t, bin)` key.
fn nearest_two(entries: &[Fingerprint], dots: &[f64], mode: MatchMode) -> Option<(usize, Option<usize>)> {
    let better = |i: usize, j: usize| -> bool {
        // is i strictly preferable to j
        match dots[i].total_cmp(&dots[j]) {
            core::cmp::Ordering::Greater => true,
            core::cmp::Ordering::Less => false,
            core::cmp::Ordering::Equal => tie_key(&entries[i]) < tie_key(&entries[j]),
        }
    };
    let mut best: Option<usize> = None;
    for i in 0..entries.len() {
        if best.is_none_or(|b| better(i, b)) {
            best = Some(i);
        }
    }
    let best = best?;
    let best_song = entries[best].song_id;
    let mut second: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if i == best {
            continue;
        }
        if mode == MatchMode::CrossSong && e.song_id == best_song {
            continue;
        }
        if second.is_none_or(|s| better(i, s)) {
            second = Some(i);
        }
    }
    Some((best, second))
}

fn tie_key(fp: &Fingerprint) -> (Option<SongId>, u64, usize, usize) {
    (fp.song_id, fp.point.t_s.to_bits(), fp.point.bin, fp.point.ptype)
}

/// Match each query fingerprint to its nearest reference entry, keeping it
/// only when `angle <= alpha * runner_up_angle` and `angle <= theta_max`.
/// With no runner-up the ratio test passes and the gate alone decides.
pub fn match_fingerprints(db: &FingerprintDb, queries: &[Fingerprint], params: &MatchParams) -> Vec<MatchPair> {
    match_against(db.entries(), queries, params)
}

/// Queries scored together, so each entry is read once per block.
const QUERY_BLOCK: usize = 16;

/// Same as [`match_fingerprints`] over a bare fingerprint set.
pub fn match_against(entries: &[Fingerprint], queries: &[Fingerprint], params: &MatchParams) -> Vec<MatchPair> {
    let n = entries.len();
    let mut dots = vec![0.0; QUERY_BLOCK * n];
    let mut out = Vec::new();
    for (block_no, block) in queries.chunks(QUERY_BLOCK).enumerate() {
        for (i, e) in entries.iter().enumerate() {
            for (j, y) in block.iter().enumerate() {
                dots[j * n + i] = dot(&e.desc, &y.desc);
            }
        }
        for j in 0..block.len() {
            let row = &dots[j * n..(j + 1) * n];
            let Some((best, second)) = nearest_two(entries, row, params.mode) else {
                continue;
            };
            let theta = libm::acos(row[best].clamp(-1.0, 1.0));
            let ratio_ok = match second {
                Some(s) => theta <= params.alpha * libm::acos(row[s].clamp(-1.0, 1.0)),
                None => true,
            };
            if ratio_ok && theta <= params.theta_max {
                out.push(MatchPair { query: block_no * QUERY_BLOCK + j, entry: best, angle: theta });
            }
        }
    }
    out
}
