//! Stable local features on the time-chroma image and their DCT
//! fingerprints.
//!
//! A candidate is a strict local maximum of the image. Around it we cut
//! patches of fixed chroma height and geometrically spaced time widths,
//! describe each one by its normalized low-frequency DCT block, and let the
//! pattern dictionary vote: a candidate survives when one pattern wins more
//! than half of the widths. The winning width becomes the point's scale, so
//! a tempo change multiplies scales by the stretch factor while the
//! fingerprint itself stays put.
//!
//! DCT blocks are indexed `(u, v)` with `u` along chroma and `v` along time,
//! flattened with `u` as the outer index and the DC term dropped.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::dct::CosTable;
use crate::index::SongId;
use crate::kmeans::kmeans;
use crate::{Error, Result, TimeChromaImage};

/// Relative inertia change at which k-means stops.
const KMEANS_TOL: f64 = 1e-6;
const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePoint {
    pub frame: usize,
    pub bin: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximaConfig {
    /// Keep at most this many of the strongest maxima in each one-second
    /// slice of the image. `None` keeps all of them.
    pub max_per_second: Option<usize>,
    /// Maxima at or below `noise_floor_ratio * max(image)` are ignored.
    pub noise_floor_ratio: f64,
}

impl Default for MaximaConfig {
    fn default() -> Self {
        MaximaConfig { max_per_second: Some(20), noise_floor_ratio: 1e-6 }
    }
}

/// Strict 8-neighbour maxima, circular along chroma, bounded in time.
/// Returned sorted by `(frame, bin)`.
pub fn find_local_maxima(img: &TimeChromaImage, cfg: &MaximaConfig) -> Vec<CandidatePoint> {
    let (nb, nt) = (img.n_bins(), img.n_frames());
    if nb < 3 || nt < 3 {
        return Vec::new();
    }
    let max = img.max_value();
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = cfg.noise_floor_ratio * max;

    let mut found = Vec::new();
    for t in 0..nt {
        let col = img.column(t);
        for b in 0..nb {
            let v = col[b];
            if v <= floor {
                continue;
            }
            let up = (b + 1) % nb;
            let down = (b + nb - 1) % nb;
            if v <= col[up] || v <= col[down] {
                continue;
            }
            let mut is_max = true;
            for tt in [t.wrapping_sub(1), t + 1] {
                if tt >= nt {
                    continue;
                }
                let c = img.column(tt);
                if v <= c[b] || v <= c[up] || v <= c[down] {
                    is_max = false;
                    break;
                }
            }
            if is_max {
                found.push(CandidatePoint { frame: t, bin: b, value: v });
            }
        }
    }

    let Some(cap) = cfg.max_per_second else {
        return found;
    };
    let second_of = |p: &CandidatePoint| libm::floor(p.frame as f64 * img.frame_hop_s()) as i64;
    let mut kept = Vec::with_capacity(found.len());
    let mut start = 0;
    while start < found.len() {
        let sec = second_of(&found[start]);
        let mut end = start;
        while end < found.len() && second_of(&found[end]) == sec {
            end += 1;
        }
        let mut bucket = found[start..end].to_vec();
        bucket.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.frame.cmp(&b.frame)).then(a.bin.cmp(&b.bin)));
        bucket.truncate(cap);
        bucket.sort_by_key(|p| (p.frame, p.bin));
        kept.extend(bucket);
        start = end;
    }
    kept
}

/// Half-width in frames of a patch spanning `width_s` seconds. Patches are
/// `2 * half + 1` frames wide so they centre exactly on a frame.
pub fn half_width_frames(width_s: f64, frame_hop_s: f64) -> usize {
    (libm::round(width_s / frame_hop_s) as usize) / 2
}

/// Dense patch, row-major, rows along chroma.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Patch {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn column_into(&self, col: usize, out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.data[r * self.cols + col];
        }
    }
}

/// Patch of `height_bins` rows centred on `bin` (wrapping) and
/// `2 * half + 1` frames centred on `frame` (zero outside the image).
pub fn extract_patch(
    img: &TimeChromaImage,
    frame: usize,
    bin: usize,
    width_s: f64,
    height_bins: usize,
) -> Result<Patch> {
    if !(width_s > 0.0) {
        return Err(Error::InvalidParameter("patch width must be positive"));
    }
    if height_bins == 0 || height_bins > img.n_bins() {
        return Err(Error::InvalidParameter("patch height must be in 1..=B"));
    }
    let half = half_width_frames(width_s, img.frame_hop_s()) as i64;
    let cols = (2 * half + 1) as usize;
    let top = bin as i64 - (height_bins / 2) as i64;
    let mut data = Vec::with_capacity(height_bins * cols);
    for r in 0..height_bins as i64 {
        for c in 0..cols as i64 {
            data.push(img.get_wrapped(top + r, frame as i64 - half + c));
        }
    }
    Ok(Patch { rows: height_bins, cols, data })
}

/// Descriptor of an arbitrary patch: `q x r` low-frequency orthonormal
/// DCT-II block without DC, zero mean, unit L2 norm.
pub fn patch_descriptor(patch: &Patch, q: usize, r: usize) -> Result<Vec<f64>> {
    if patch.rows < 2 || patch.cols < 2 {
        return Err(Error::InvalidParameter("patch must be at least 2x2"));
    }
    if q < 2 || r < 2 {
        return Err(Error::InvalidParameter("q and r must be at least 2"));
    }
    let engine = DescriptorEngine::new(q, r, patch.rows, &[]);
    let mut column = vec![0.0; patch.rows];
    let mut coefs = vec![0.0; patch.cols * q];
    let mut sq = vec![0.0; patch.cols];
    for c in 0..patch.cols {
        patch.column_into(c, &mut column);
        sq[c] = engine.column_stage(&column, &mut coefs[c * q..(c + 1) * q]);
    }
    engine.descriptor(&coefs, &sq)
}

/// Two-stage separable DCT: chroma coefficients per column, then time
/// coefficients per width. Both `patch_descriptor` and the image paths go
/// through here so they agree bit for bit.
struct DescriptorEngine {
    q: usize,
    r: usize,
    height: usize,
    /// Chroma basis transposed, `chroma_t[h * q + u]`.
    chroma_t: Vec<f64>,
    time: BTreeMap<usize, CosTable>,
}

impl DescriptorEngine {
    fn new(q: usize, r: usize, height: usize, widths: &[usize]) -> Self {
        let time = widths.iter().map(|&w| (w, CosTable::new(w, r))).collect();
        let chroma = CosTable::new(height, q);
        let mut chroma_t = vec![0.0; height * q];
        for u in 0..q {
            for (h, &c) in chroma.row(u).iter().enumerate() {
                chroma_t[h * q + u] = c;
            }
        }
        DescriptorEngine { q, r, height, chroma_t, time }
    }

    fn dim(&self) -> usize {
        self.q * self.r - 1
    }

    /// Chroma-axis coefficients of one column; returns its sum of squares.
    fn column_stage(&self, column: &[f64], out: &mut [f64]) -> f64 {
        // accumulate row by row so the inner loop runs over contiguous u
        out.fill(0.0);
        let mut sq = 0.0;
        for (h, &c) in column.iter().enumerate() {
            sq += c * c;
            for (o, b) in out.iter_mut().zip(&self.chroma_t[h * self.q..(h + 1) * self.q]) {
                *o += b * c;
            }
        }
        sq
    }

    /// Chroma coefficients for frames `lo..=hi` around `bin`.
    fn image_columns(&self, img: &TimeChromaImage, bin: usize, lo: i64, hi: i64) -> (Vec<f64>, Vec<f64>) {
        let n = (hi - lo + 1) as usize;
        let mut coefs = vec![0.0; n * self.q];
        let mut sq = vec![0.0; n];
        let mut column = vec![0.0; self.height];
        let nb = img.n_bins() as i64;
        let top = bin as i64 - (self.height / 2) as i64;
        for (i, t) in (lo..=hi).enumerate() {
            if t < 0 || t >= img.n_frames() as i64 {
                continue;
            }
            let col = img.column(t as usize);
            for (h, c) in column.iter_mut().enumerate() {
                *c = col[(top + h as i64).rem_euclid(nb) as usize];
            }
            sq[i] = self.column_stage(&column, &mut coefs[i * self.q..(i + 1) * self.q]);
        }
        (coefs, sq)
    }

    /// Time stage plus normalization over `sq.len()` columns.
    fn descriptor(&self, coefs: &[f64], sq: &[f64]) -> Result<Vec<f64>> {
        let width = sq.len();
        let built;
        let table = match self.time.get(&width) {
            Some(t) => t,
            None => {
                built = CosTable::new(width, self.r);
                &built
            }
        };
        let q = self.q;
        // acc[v * q + u], summed over columns in order
        let mut acc = vec![0.0; self.r * q];
        for v in 0..self.r {
            let basis = table.row(v);
            let a = &mut acc[v * q..(v + 1) * q];
            for (w, &b) in basis.iter().enumerate().take(width) {
                for (x, c) in a.iter_mut().zip(&coefs[w * q..(w + 1) * q]) {
                    *x += c * b;
                }
            }
        }
        let mut out = Vec::with_capacity(self.dim());
        for u in 0..q {
            for v in 0..self.r {
                if u == 0 && v == 0 {
                    continue;
                }
                out.push(acc[v * q + u]);
            }
        }
        let frob = libm::sqrt(sq.iter().sum::<f64>());
        normalize(out, frob)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero mean, unit norm. `scale` is the magnitude the vector is compared
/// against when deciding that it is numerically zero.
fn normalize(mut v: Vec<f64>, scale: f64) -> Result<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if !(norm > 1e-10 * scale) || norm == 0.0 {
        return Err(Error::DegeneratePatch);
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(v)
}

/// Representative patch descriptors used to classify feature points.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDictionary {
    patterns: Vec<Vec<f64>>,
    q: usize,
    r: usize,
    m: u32,
    n: u32,
    w_t_ms: u32,
    w_p: usize,
}

impl PatternDictionary {
    /// Assemble a dictionary from already-normalized descriptors.
    pub fn new(patterns: Vec<Vec<f64>>, q: usize, r: usize, m: u32, n: u32, w_t_ms: u32, w_p: usize) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::InvalidParameter("dictionary needs at least one pattern"));
        }
        if q < 2 || r < 2 || w_p == 0 {
            return Err(Error::InvalidParameter("bad dictionary geometry"));
        }
        for p in &patterns {
            if p.len() != q * r - 1 {
                return Err(Error::DimensionMismatch { expected: q * r - 1, found: p.len() });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("pattern values must be finite"));
            }
        }
        Ok(PatternDictionary { patterns, q, r, m, n, w_t_ms, w_p })
    }

    pub fn patterns(&self) -> &[Vec<f64>] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
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

    pub fn w_t_ms(&self) -> u32 {
        self.w_t_ms
    }

    pub fn w_t_s(&self) -> f64 {
        f64::from(self.w_t_ms) / 1000.0
    }

    /// Patch height in chroma bins.
    pub fn w_p(&self) -> usize {
        self.w_p
    }

    pub fn dim(&self) -> usize {
        self.q * self.r - 1
    }

    /// Best-correlated pattern; ties go to the lower index.
    pub fn classify(&self, desc: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in self.patterns.iter().enumerate() {
            let c = dot(p, desc);
            if c > best.1 {
                best = (i, c);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryConfig {
    pub c: usize,
    pub w_t_s: f64,
    pub w_p: usize,
    pub q: usize,
    pub r: usize,
    pub seed: u64,
    pub maxima: MaximaConfig,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig { c: 10, w_t_s: 2.0, w_p: 72, q: 12, r: 12, seed: 1, maxima: MaximaConfig::default() }
    }
}

/// Dictionary plus the number of corpus patches that fell in each class.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryBuild {
    pub dictionary: PatternDictionary,
    pub cluster_sizes: Vec<usize>,
    pub patches: usize,
}

/// Cluster `w_t x w_p` patches around every local maximum of the corpus.
pub fn build_dictionary(corpus: &[TimeChromaImage], cfg: &DictionaryConfig) -> Result<DictionaryBuild> {
    if cfg.c == 0 {
        return Err(Error::InvalidParameter("c must be positive"));
    }
    let required = 10 * cfg.c;
    let Some(first) = corpus.first() else {
        return Err(Error::InsufficientPatches { found: 0, required });
    };
    let params = *first.params();
    if cfg.w_p == 0 || cfg.w_p > params.bins() {
        return Err(Error::InvalidParameter("w_p must be in 1..=B"));
    }
    let engine = DescriptorEngine::new(cfg.q, cfg.r, cfg.w_p, &[]);
    let mut descs = Vec::new();
    for img in corpus {
        if img.params() != &params {
            return Err(Error::InvalidParameter("corpus images use different chroma parameters"));
        }
        let half = half_width_frames(cfg.w_t_s, img.frame_hop_s()) as i64;
        for cand in find_local_maxima(img, &cfg.maxima) {
            let f = cand.frame as i64;
            let (coefs, sq) = engine.image_columns(img, cand.bin, f - half, f + half);
            if let Ok(d) = engine.descriptor(&coefs, &sq) {
                descs.push(d);
            }
        }
    }
    if descs.len() < required {
        return Err(Error::InsufficientPatches { found: descs.len(), required });
    }
    let km = kmeans(&descs, cfg.c, cfg.seed, KMEANS_MAX_ITER, KMEANS_TOL);
    let mut patterns = Vec::with_capacity(cfg.c);
    for c in km.centroids {
        patterns.push(normalize(c, 1.0)?);
    }
    let w_t_ms = libm::round(cfg.w_t_s * 1000.0) as u32;
    let dictionary = PatternDictionary::new(patterns, cfg.q, cfg.r, params.m, params.n, w_t_ms, cfg.w_p)?;
    Ok(DictionaryBuild { dictionary, cluster_sizes: km.counts, patches: descs.len() })
}

/// Geometric grid of patch widths scanned around each candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleScan {
    pub s_min: f64,
    pub s_max: f64,
    pub num_scales: usize,
}

impl Default for ScaleScan {
    fn default() -> Self {
        ScaleScan { s_min: 1.0, s_max: 4.0, num_scales: 30 }
    }
}

impl ScaleScan {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_min > 0.0 && self.s_max >= self.s_min) || self.num_scales == 0 {
            return Err(Error::InvalidParameter("scale scan needs 0 < s_min <= s_max and at least one scale"));
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<f64> {
        if self.num_scales == 1 {
            return vec![self.s_min];
        }
        let k = (self.num_scales - 1) as f64;
        (0..self.num_scales).map(|i| self.s_min * libm::pow(self.s_max / self.s_min, i as f64 / k)).collect()
    }

    /// Ratio between neighbouring widths.
    pub fn step_ratio(&self) -> f64 {
        if self.num_scales <= 1 {
            1.0
        } else {
            libm::pow(self.s_max / self.s_min, 1.0 / (self.num_scales - 1) as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    /// Centre time in seconds.
    pub t_s: f64,
    pub frame: usize,
    /// Chroma bin.
    pub bin: usize,
    /// Assigned time scale (patch width) in seconds.
    pub scale_s: f64,
    /// Index of the dictionary pattern the neighbourhood resembles.
    pub ptype: usize,
    /// The scale sits at an end of the scanned range.
    pub at_boundary: bool,
}

/// Outcome of the per-width stability vote for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Vote {
    Stable { ptype: usize, scale_index: usize },
    Unstable,
}

/// `per_scale[k]` is the best pattern and its correlation at width `k`, or
/// `None` for a degenerate patch.
pub(crate) fn stability_vote(per_scale: &[Option<(usize, f64)>], n_patterns: usize) -> Vote {
    let mut votes = vec![0usize; n_patterns];
    for (p, _) in per_scale.iter().flatten() {
        votes[*p] += 1;
    }
    let mut winner = 0;
    for (p, &v) in votes.iter().enumerate() {
        if v > votes[winner] {
            winner = p;
        }
    }
    if 2 * votes[winner] <= per_scale.len() {
        return Vote::Unstable;
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in per_scale.iter().enumerate() {
        if let Some((p, c)) = s {
            if *p == winner && best.is_none_or(|(_, bc)| *c > bc) {
                best = Some((k, *c));
            }
        }
    }
    Vote::Stable { ptype: winner, scale_index: best.map(|b| b.0).unwrap_or(0) }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectConfig {
    pub scan: ScaleScan,
    pub maxima: MaximaConfig,
}

pub fn detect_features(
    img: &TimeChromaImage,
    dict: &PatternDictionary,
    cfg: &DetectConfig,
) -> Result<Vec<FeaturePoint>> {
    cfg.scan.validate()?;
    if dict.is_empty() {
        return Err(Error::InvalidParameter("dictionary is empty"));
    }
    if dict.w_p() > img.n_bins() {
        return Err(Error::InvalidParameter("dictionary patch height exceeds image"));
    }
    let widths = cfg.scan.widths();
    let halves: Vec<usize> = widths.iter().map(|&w| half_width_frames(w, img.frame_hop_s())).collect();
    let hmax = *halves.iter().max().unwrap();
    let frame_widths: Vec<usize> = halves.iter().map(|h| 2 * h + 1).collect();
    let engine = DescriptorEngine::new(dict.q(), dict.r(), dict.w_p(), &frame_widths);
    let q = dict.q();

    let mut points = Vec::new();
    let mut per_scale = vec![None; widths.len()];
    for cand in find_local_maxima(img, &cfg.maxima) {
        let f = cand.frame as i64;
        let (coefs, sq) = engine.image_columns(img, cand.bin, f - hmax as i64, f + hmax as i64);
        for (slot, &h) in per_scale.iter_mut().zip(&halves) {
            let off = hmax - h;
            let w = 2 * h + 1;
            *slot =
                engine.descriptor(&coefs[off * q..(off + w) * q], &sq[off..off + w]).ok().map(|d| dict.classify(&d));
        }
        if let Vote::Stable { ptype, scale_index } = stability_vote(&per_scale, dict.len()) {
            points.push(FeaturePoint {
                t_s: img.time_of(cand.frame),
                frame: cand.frame,
                bin: cand.bin,
                scale_s: widths[scale_index],
                ptype,
                at_boundary: scale_index == 0 || scale_index + 1 == widths.len(),
            });
        }
    }
    Ok(points)
}

/// Unit-norm descriptor of a feature point plus its attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub desc: Vec<f64>,
    pub point: FeaturePoint,
    /// Set when the fingerprint is stored in a database.
    pub song_id: Option<SongId>,
}

/// Describe each point with a `scale x m` patch. Degenerate patches are
/// dropped.
pub fn fingerprint_features(img: &TimeChromaImage, points: &[FeaturePoint], q: usize, r: usize) -> Vec<Fingerprint> {
    let height = (img.params().m as usize).min(img.n_bins());
    let engine = DescriptorEngine::new(q, r, height, &[]);
    points
        .iter()
        .filter_map(|p| {
            let h = half_width_frames(p.scale_s, img.frame_hop_s()) as i64;
            let f = p.frame as i64;
            let (coefs, sq) = engine.image_columns(img, p.bin, f - h, f + h);
            engine.descriptor(&coefs, &sq).ok().map(|desc| Fingerprint { desc, point: *p, song_id: None })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ChromaParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> ChromaParams {
        ChromaParams::default()
    }

    fn smooth_image(seed: u64, frames: usize) -> TimeChromaImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blobs: Vec<(f64, f64, f64, f64, f64)> = (0..frames / 4)
            .map(|_| {
                (
                    rng.random_range(0.0..288.0),
                    rng.random_range(0.0..frames as f64),
                    rng.random_range(2.0..9.0),
                    rng.random_range(3.0..15.0),
                    rng.random_range(0.2..1.0),
                )
            })
            .collect();
        TimeChromaImage::from_fn(params(), frames, 0.025, |b, t| {
            blobs
                .iter()
                .map(|&(cb, ct, sb, st, a)| {
                    let mut db = (b as f64 - cb).abs();
                    db = db.min(288.0 - db);
                    let dt = t as f64 - ct;
                    a * (-(db * db) / (2.0 * sb * sb) - dt * dt / (2.0 * st * st)).exp()
                })
                .sum()
        })
        .unwrap()
    }

    fn brute_force_maxima(img: &TimeChromaImage, floor: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for t in 0..img.n_frames() {
            for b in 0..img.n_bins() {
                let v = img.get(b, t);
                if v <= floor {
                    continue;
                }
                let mut ok = true;
                for dt in -1i64..=1 {
                    for db in -1i64..=1 {
                        if dt == 0 && db == 0 {
                            continue;
                        }
                        let tt = t as i64 + dt;
                        if tt < 0 || tt >= img.n_frames() as i64 {
                            continue;
                        }
                        if img.get_wrapped(b as i64 + db, tt) >= v {
                            ok = false;
                        }
                    }
                }
                if ok {
                    out.push((t, b));
                }
            }
        }
        out
    }

    #[test]
    fn constant_image_has_no_maxima() {
        let img = TimeChromaImage::from_fn(params(), 10, 0.025, |_, _| 1.0).unwrap();
        assert!(find_local_maxima(&img, &MaximaConfig::default()).is_empty());
    }

    #[test]
    fn single_impulse() {
        let img =
            TimeChromaImage::from_fn(params(), 80, 0.025, |b, t| if (b, t) == (5, 40) { 1.0 } else { 0.0 }).unwrap();
        let found = find_local_maxima(&img, &MaximaConfig::default());
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].frame, found[0].bin), (40, 5));
    }

    #[test]
    fn maxima_wrap_across_chroma_edge() {
        // bin 287 neighbours bin 0
        let img = TimeChromaImage::from_fn(params(), 5, 0.025, |b, t| match (b, t) {
            (0, 2) => 2.0,
            (287, 2) => 1.0,
            _ => 0.0,
        })
        .unwrap();
        let found = find_local_maxima(&img, &MaximaConfig { max_per_second: None, noise_floor_ratio: 0.0 });
        assert_eq!(found.iter().map(|p| (p.frame, p.bin)).collect::<Vec<_>>(), vec![(2, 0)]);
    }

    #[test]
    fn maxima_match_brute_force_scan() {
        let img = smooth_image(9, 400);
        let cfg = MaximaConfig { max_per_second: None, noise_floor_ratio: 1e-6 };
        let got: Vec<_> = find_local_maxima(&img, &cfg).iter().map(|p| (p.frame, p.bin)).collect();
        let want = brute_force_maxima(&img, 1e-6 * img.max_value());
        assert!(!want.is_empty());
        assert_eq!(got, want);
    }

    #[test]
    fn density_cap_keeps_strongest_per_second() {
        let img = smooth_image(4, 400);
        let all = find_local_maxima(&img, &MaximaConfig { max_per_second: None, noise_floor_ratio: 1e-6 });
        let capped = find_local_maxima(&img, &MaximaConfig { max_per_second: Some(3), noise_floor_ratio: 1e-6 });
        let sec = |p: &CandidatePoint| (p.frame as f64 * 0.025).floor() as i64;
        for s in 0..10 {
            let mut in_sec: Vec<f64> = all.iter().filter(|p| sec(p) == s).map(|p| p.value).collect();
            in_sec.sort_by(|a, b| b.total_cmp(a));
            in_sec.truncate(3);
            let mut kept: Vec<f64> = capped.iter().filter(|p| sec(p) == s).map(|p| p.value).collect();
            kept.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(kept, in_sec);
        }
    }

    #[test]
    fn impulse_patch() {
        let img =
            TimeChromaImage::from_fn(params(), 20, 0.025, |b, t| if (b, t) == (10, 10) { 3.0 } else { 0.0 }).unwrap();
        let p = extract_patch(&img, 10, 10, 5.0 * 0.025, 3).unwrap();
        assert_eq!((p.rows, p.cols), (3, 5));
        let nonzero: Vec<_> = p.data.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nonzero, vec![(7, &3.0)]);
    }

    #[test]
    fn patch_rows_wrap() {
        let img = TimeChromaImage::from_fn(params(), 3, 0.025, |b, _| b as f64).unwrap();
        let p = extract_patch(&img, 1, 2, 0.025, 72).unwrap();
        let rows: Vec<f64> = (0..72).map(|r| p.get(r, 0)).collect();
        assert_eq!(rows[0], 254.0);
        assert_eq!(rows[33], 287.0);
        assert_eq!(rows[34], 0.0);
        assert_eq!(rows[36], 2.0);
    }

    #[test]
    fn patch_at_edges_is_zero_filled() {
        let img = TimeChromaImage::from_fn(params(), 4, 0.025, |_, _| 1.0).unwrap();
        let p = extract_patch(&img, 0, 0, 5.0 * 0.025, 1).unwrap();
        assert_eq!(p.data, vec![0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn shifted_image_gives_identical_patches() {
        let img = smooth_image(2, 120);
        let shifted = img.circular_shift(37);
        let a = extract_patch(&img, 60, 270, 1.0, 72).unwrap();
        let b = extract_patch(&shifted, 60, (270 + 37) % 288, 1.0, 72).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn descriptor_dimension_and_normalization() {
        let img = smooth_image(5, 200);
        let p = extract_patch(&img, 100, 40, 2.0, 72).unwrap();
        let d = patch_descriptor(&p, 12, 12).unwrap();
        assert_eq!(d.len(), 143);
        let mean = d.iter().sum::<f64>() / 143.0;
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn descriptor_is_affine_invariant() {
        let img = smooth_image(6, 200);
        let p = extract_patch(&img, 90, 100, 1.5, 72).unwrap();
        let mut p2 = p.clone();
        for v in p2.data.iter_mut() {
            *v = 2.0 * *v + 7.0;
        }
        let a = patch_descriptor(&p, 12, 12).unwrap();
        let b = patch_descriptor(&p2, 12, 12).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_patch_is_degenerate() {
        let p = Patch { rows: 4, cols: 4, data: vec![3.5; 16] };
        assert_eq!(patch_descriptor(&p, 3, 3), Err(Error::DegeneratePatch));
        let z = Patch { rows: 4, cols: 4, data: vec![0.0; 16] };
        assert_eq!(patch_descriptor(&z, 3, 3), Err(Error::DegeneratePatch));
    }

    #[test]
    fn descriptor_survives_time_resampling() {
        // Smooth patch sampled at 2W frames vs W frames over the same content.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let comps: Vec<(f64, f64, f64, f64)> = (0..6)
                .map(|_| {
                    (
                        rng.random_range(0.0..4.0),
                        rng.random_range(0.0..3.0),
                        rng.random_range(0.0..core::f64::consts::TAU),
                        rng.random_range(0.2..1.0),
                    )
                })
                .collect();
            let field = |y: f64, x: f64| -> f64 {
                comps
                    .iter()
                    .map(|&(fy, fx, ph, a)| a * (core::f64::consts::PI * (fy * y + fx * x) + ph).cos())
                    .sum::<f64>()
                    + 10.0
            };
            let make = |cols: usize| {
                let rows = 72;
                let mut data = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        data.push(field((r as f64 + 0.5) / rows as f64, (c as f64 + 0.5) / cols as f64));
                    }
                }
                Patch { rows, cols, data }
            };
            let a = patch_descriptor(&make(121), 12, 12).unwrap();
            let b = patch_descriptor(&make(61), 12, 12).unwrap();
            let corr: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!(corr >= 0.95, "corr {corr}");
        }
    }

    #[test]
    fn vote_needs_strict_majority() {
        let unanimous: Vec<_> =
            (0..30).map(|k| Some((3, 0.5 + k as f64 * 0.001 * if k == 12 { 100.0 } else { 1.0 }))).collect();
        assert_eq!(stability_vote(&unanimous, 10), Vote::Stable { ptype: 3, scale_index: 12 });

        let split: Vec<_> = (0..30).map(|k| Some((if k < 15 { 1 } else { k % 5 + 2 }, 0.9))).collect();
        assert_eq!(stability_vote(&split, 10), Vote::Unstable);

        let mut just = split.clone();
        just[29] = Some((1, 0.1));
        assert_eq!(stability_vote(&just, 10), Vote::Stable { ptype: 1, scale_index: 0 });

        let none: Vec<Option<(usize, f64)>> = vec![None; 30];
        assert_eq!(stability_vote(&none, 10), Vote::Unstable);
    }

    #[test]
    fn scale_grid_is_geometric() {
        let scan = ScaleScan::default();
        let w = scan.widths();
        assert_eq!(w.len(), 30);
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[29] - 4.0).abs() < 1e-12);
        for pair in w.windows(2) {
            assert!((pair[1] / pair[0] - scan.step_ratio()).abs() < 1e-12);
        }
    }

    #[test]
    fn dictionary_single_class_is_the_patch_descriptor() {
        let img = TimeChromaImage::from_fn(params(), 400, 0.025, |b, t| {
            // identical bumps every 40 frames at bin 100
            let dt = (t % 40) as f64 - 20.0;
            let db = b as f64 - 100.0;
            (-(dt * dt) / 18.0 - db * db / 8.0).exp()
        })
        .unwrap();
        let cfg = DictionaryConfig { c: 1, w_t_s: 0.5, ..Default::default() };
        let built = build_dictionary(core::slice::from_ref(&img), &cfg).unwrap();
        assert_eq!(built.cluster_sizes, vec![built.patches]);
        let p = extract_patch(&img, 60, 100, 0.5, 72).unwrap();
        let d = patch_descriptor(&p, 12, 12).unwrap();
        for (x, y) in built.dictionary.patterns()[0].iter().zip(&d) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn dictionary_needs_enough_patches() {
        let img =
            TimeChromaImage::from_fn(params(), 10, 0.025, |b, t| if (b, t) == (5, 5) { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(
            build_dictionary(&[img], &DictionaryConfig::default()),
            Err(Error::InsufficientPatches { found: 1, required: 100 })
        );
        assert!(matches!(
            build_dictionary(&[], &DictionaryConfig::default()),
            Err(Error::InsufficientPatches { found: 0, .. })
        ));
    }

    #[test]
    fn dictionary_is_deterministic() {
        let imgs = [smooth_image(1, 600), smooth_image(2, 600)];
        let cfg = DictionaryConfig { c: 4, ..Default::default() };
        assert_eq!(build_dictionary(&imgs, &cfg).unwrap(), build_dictionary(&imgs, &cfg).unwrap());
    }
}
