//! Song-level decisions from fingerprint matches.
//!
//! Matches are first grouped into per-song query intervals by a sliding
//! majority vote. Each interval is then localized: outliers are pruned on
//! the scale ratio and on the time offset (both via Gaussian-smoothed
//! histograms), the line `t_q = a * t_db + b` is fitted by least squares
//! over the survivors, and the pitch shift is the mode of the chroma
//! offsets.

use alloc::vec;
use alloc::vec::Vec;

use crate::index::{match_fingerprints, MatchParams};
use crate::{Error, Fingerprint, FingerprintDb, Result, SongId};

/// Attributes of a query feature that found a match in the database.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedFeature {
    pub song: SongId,
    /// `scale(query) / scale(db)`.
    pub a_hat: f64,
    /// `(bin_query - bin_db) mod B`.
    pub dp_hat: u32,
    pub t_q: f64,
    pub t_db: f64,
    /// Scale of the query feature, seconds.
    pub scale_q: f64,
}

/// Query-side span attributed to one song.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub song: SongId,
    pub t_start: f64,
    pub duration: f64,
}

impl Interval {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub song: SongId,
    pub query_start: f64,
    pub query_end: f64,
    /// Tempo factor in `t_q = a * t_db + b`.
    pub a: f64,
    /// Offset in seconds.
    pub b: f64,
    /// Pitch shift in chroma bins, in `[0, bins)`.
    pub dp: u32,
    pub bins: u32,
    /// Features that survived pruning.
    pub support: usize,
}

impl Detection {
    /// Pitch shift folded into `(-B/2, B/2]`.
    pub fn dp_signed(&self) -> i64 {
        let dp = i64::from(self.dp);
        let b = i64::from(self.bins);
        if dp > b / 2 {
            dp - b
        } else {
            dp
        }
    }

    /// Matching span in the database song.
    pub fn db_interval(&self) -> (f64, f64) {
        ((self.query_start - self.b) / self.a, (self.query_end - self.b) / self.a)
    }
}

/// Build matched-feature records from raw match pairs.
pub fn matched_features(
    db: &FingerprintDb,
    queries: &[Fingerprint],
    pairs: &[crate::MatchPair],
) -> Vec<MatchedFeature> {
    let bins = (db.m() * db.n()) as i64;
    pairs
        .iter()
        .filter_map(|p| {
            let q = &queries[p.query];
            let e = &db.entries()[p.entry];
            let song = e.song_id?;
            Some(MatchedFeature {
                song,
                a_hat: q.point.scale_s / e.point.scale_s,
                dp_hat: (q.point.bin as i64 - e.point.bin as i64).rem_euclid(bins) as u32,
                t_q: q.point.t_s,
                t_db: e.point.t_s,
                scale_q: q.point.scale_s,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteParams {
    /// Window length, seconds.
    pub delta: f64,
    /// Share of a window's matches one song must hold; above 1/2.
    pub r_frac: f64,
    /// Window hop, seconds.
    pub hop: f64,
    /// Windows with fewer matches are left unassigned.
    pub min_matches: usize,
}

impl Default for VoteParams {
    fn default() -> Self {
        VoteParams { delta: 10.0, r_frac: 0.7, hop: 1.0, min_matches: 3 }
    }
}

/// Slide a window over the query and merge runs of windows won by the same
/// song into intervals.
pub fn vote_windows(matches: &[MatchedFeature], query_len: f64, params: &VoteParams) -> Result<Vec<Interval>> {
    if !(params.r_frac > 0.5 && params.r_frac <= 1.0) {
        return Err(Error::InvalidParameter("r_frac must be in (0.5, 1]"));
    }
    if !(params.delta > 0.0 && params.hop > 0.0) {
        return Err(Error::InvalidParameter("window length and hop must be positive"));
    }
    let n_windows = if query_len <= params.delta {
        1
    } else {
        libm::floor((query_len - params.delta) / params.hop + 1e-9) as usize + 1
    };

    let mut sorted: Vec<&MatchedFeature> = matches.iter().collect();
    sorted.sort_by(|a, b| a.t_q.total_cmp(&b.t_q));

    let mut winners: Vec<Option<SongId>> = Vec::with_capacity(n_windows);
    let mut counts: Vec<(SongId, usize)> = Vec::new();
    for w in 0..n_windows {
        let start = w as f64 * params.hop;
        let end = start + params.delta;
        let lo = sorted.partition_point(|m| m.t_q < start);
        let hi = sorted.partition_point(|m| m.t_q < end);
        let total = hi - lo;
        if total < params.min_matches {
            winners.push(None);
            continue;
        }
        counts.clear();
        for m in &sorted[lo..hi] {
            match counts.iter_mut().find(|(s, _)| *s == m.song) {
                Some((_, c)) => *c += 1,
                None => counts.push((m.song, 1)),
            }
        }
        let (song, c) = counts.iter().copied().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).unwrap();
        winners.push((c as f64 >= params.r_frac * total as f64).then_some(song));
    }

    let mut out = Vec::new();
    let mut w = 0;
    while w < n_windows {
        let Some(song) = winners[w] else {
            w += 1;
            continue;
        };
        let first = w;
        while w + 1 < n_windows && winners[w + 1] == Some(song) {
            w += 1;
        }
        let t_start = first as f64 * params.hop;
        let t_end = (w as f64 * params.hop + params.delta).min(query_len.max(t_start));
        out.push(Interval { song, t_start, duration: (t_end - t_start).max(f64::MIN_POSITIVE) });
        w += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeParams {
    /// Width of one scale-ratio histogram bin, in octaves.
    pub a_bin_octaves: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Width of one offset histogram bin, seconds.
    pub b_bin_s: f64,
    /// Gaussian smoothing, in histogram bins.
    pub sigma_bins: f64,
    /// `delta_a = a_tilde * delta_a_rel`.
    pub delta_a_rel: f64,
    /// Offset pruning radius, seconds.
    pub delta_b: f64,
    pub min_support: usize,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        LocalizeParams {
            a_bin_octaves: 1.0 / 48.0,
            a_min: 0.5,
            a_max: 2.0,
            b_bin_s: 0.5,
            sigma_bins: 1.0,
            delta_a_rel: libm::exp2(1.0f64 / 12.0) - 1.0,
            delta_b: 2.0,
            min_support: 5,
        }
    }
}

/// Gaussian low-pass over a histogram, zero beyond the ends.
fn smooth(hist: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return hist.to_vec();
    }
    let radius = libm::ceil(3.0 * sigma) as i64;
    let kernel: Vec<f64> = (-radius..=radius).map(|k| libm::exp(-(k * k) as f64 / (2.0 * sigma * sigma))).collect();
    let n = hist.len() as i64;
    (0..n)
        .map(|i| {
            (-radius..=radius)
                .filter(|k| (0..n).contains(&(i + k)))
                .map(|k| hist[(i + k) as usize] * kernel[(k + radius) as usize])
                .sum()
        })
        .collect()
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Closed-form least squares for `y = a x + b`. Returns `None` when `x`
/// has no spread.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 1e-12 * n) {
        return None;
    }
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// Most frequent value; ties resolve to the smallest.
fn mode(values: &[u32]) -> u32 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut best = (sorted[0], 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best.1 {
            best = (sorted[i], j - i);
        }
        i = j;
    }
    best.0
}

/// Intermediate sets of the localization, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeTrace {
    pub song_filtered: Vec<MatchedFeature>,
    pub after_scale: Vec<MatchedFeature>,
    pub after_offset: Vec<MatchedFeature>,
    pub a_tilde: f64,
    pub b_tilde: f64,
}

pub fn localize(
    interval: &Interval,
    matches: &[MatchedFeature],
    bins: u32,
    params: &LocalizeParams,
) -> Result<Detection> {
    localize_traced(interval, matches, bins, params).map(|(d, _)| d)
}

pub fn localize_traced(
    interval: &Interval,
    matches: &[MatchedFeature],
    bins: u32,
    params: &LocalizeParams,
) -> Result<(Detection, LocalizeTrace)> {
    let insufficient = |found| Error::InsufficientSupport { found, required: params.min_support };

    // (1) keep the interval's song; order the set so nothing depends on
    // input order
    let mut feats: Vec<MatchedFeature> =
        matches.iter().filter(|m| m.song == interval.song && interval.contains(m.t_q)).copied().collect();
    feats.sort_by(|x, y| {
        x.t_q
            .total_cmp(&y.t_q)
            .then(x.t_db.total_cmp(&y.t_db))
            .then(x.a_hat.total_cmp(&y.a_hat))
            .then(x.dp_hat.cmp(&y.dp_hat))
    });
    if feats.len() < params.min_support {
        return Err(insufficient(feats.len()));
    }
    let song_filtered = feats.clone();

    // (2-3) log-spaced scale-ratio histogram
    let lo = libm::log2(params.a_min);
    let n_a = libm::round((libm::log2(params.a_max) - lo) / params.a_bin_octaves) as usize;
    let mut hist = vec![0.0; n_a];
    for f in &feats {
        let pos = (libm::log2(f.a_hat) - lo) / params.a_bin_octaves;
        if pos >= 0.0 && (pos as usize) < n_a {
            hist[pos as usize] += 1.0;
        }
    }
    let peak = argmax(&smooth(&hist, params.sigma_bins));
    let a_tilde = libm::exp2(lo + (peak as f64 + 0.5) * params.a_bin_octaves);

    // (4)
    let delta_a = a_tilde * params.delta_a_rel;
    feats.retain(|f| f.a_hat > a_tilde - delta_a && f.a_hat < a_tilde + delta_a);
    if feats.len() < params.min_support {
        return Err(insufficient(feats.len()));
    }
    let after_scale = feats.clone();

    // (5-7) offsets on mean-centred time axes
    let n = feats.len() as f64;
    let mean_q = feats.iter().map(|f| f.t_q).sum::<f64>() / n;
    let mean_db = feats.iter().map(|f| f.t_db).sum::<f64>() / n;
    let offsets: Vec<f64> = feats.iter().map(|f| (f.t_q - mean_q) - a_tilde * (f.t_db - mean_db)).collect();
    let b_lo = offsets.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let b_hi = offsets.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let n_b = libm::floor((b_hi - b_lo) / params.b_bin_s) as usize + 1;
    let mut hist = vec![0.0; n_b];
    for &o in &offsets {
        hist[(((o - b_lo) / params.b_bin_s) as usize).min(n_b - 1)] += 1.0;
    }
    let peak = argmax(&smooth(&hist, params.sigma_bins));
    let b_tilde_c = b_lo + (peak as f64 + 0.5) * params.b_bin_s;
    let b_tilde = b_tilde_c + mean_q - a_tilde * mean_db;

    // (8)
    let mut kept = Vec::with_capacity(feats.len());
    for (f, o) in feats.iter().zip(&offsets) {
        if (o - b_tilde_c).abs() < params.delta_b {
            kept.push(*f);
        }
    }
    if kept.len() < params.min_support {
        return Err(insufficient(kept.len()));
    }

    // (9)
    let xs: Vec<f64> = kept.iter().map(|f| f.t_db).collect();
    let ys: Vec<f64> = kept.iter().map(|f| f.t_q).collect();
    let (a, b) = fit_line(&xs, &ys).unwrap_or((a_tilde, b_tilde));

    // (10)
    let dps: Vec<u32> = kept.iter().map(|f| f.dp_hat).collect();
    let dp = mode(&dps);

    // Boundaries: first and last features compatible with the fitted line,
    // widened by half their scale.
    let compatible = song_filtered.iter().filter(|f| (f.t_q - a * f.t_db - b).abs() < params.delta_b);
    let mut first: Option<&MatchedFeature> = None;
    let mut last: Option<&MatchedFeature> = None;
    for f in compatible {
        if first.is_none_or(|x| f.t_q < x.t_q) {
            first = Some(f);
        }
        if last.is_none_or(|x| f.t_q > x.t_q) {
            last = Some(f);
        }
    }
    let (query_start, query_end) = match (first, last) {
        (Some(f), Some(l)) => ((f.t_q - f.scale_q / 2.0).max(0.0), l.t_q + l.scale_q / 2.0),
        _ => (interval.t_start, interval.t_end()),
    };

    let detection = Detection { song: interval.song, query_start, query_end, a, b, dp, bins, support: kept.len() };
    let trace = LocalizeTrace { song_filtered, after_scale, after_offset: kept, a_tilde, b_tilde };
    Ok((detection, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectParams {
    pub matching: MatchParams,
    pub vote: VoteParams,
    pub localize: LocalizeParams,
}

/// Full song-level detection over a query's fingerprints. An empty result
/// means no copy was found.
pub fn detect(
    db: &FingerprintDb,
    query: &[Fingerprint],
    query_len: f64,
    params: &DetectParams,
) -> Result<Vec<Detection>> {
    if db.is_empty() || query.is_empty() {
        return Ok(Vec::new());
    }
    let pairs = match_fingerprints(db, query, &params.matching);
    let feats = matched_features(db, query, &pairs);
    let bins = db.m() * db.n();
    let mut out = Vec::new();
    for interval in vote_windows(&feats, query_len, &params.vote)? {
        match localize(&interval, &feats, bins, &params.localize) {
            Ok(d) => out.push(d),
            Err(Error::InsufficientSupport { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    out.sort_by(|x, y| x.query_start.total_cmp(&y.query_start).then(x.song.cmp(&y.song)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mf(song: u32, t_q: f64, t_db: f64, a_hat: f64, dp: u32) -> MatchedFeature {
        MatchedFeature { song: SongId(song), a_hat, dp_hat: dp, t_q, t_db, scale_q: 1.0 }
    }

    #[test]
    fn uniform_single_song_gives_one_interval() {
        let m: Vec<_> = (0..600).map(|i| mf(3, i as f64 * 0.1, 0.0, 1.0, 0)).collect();
        let iv = vote_windows(&m, 60.0, &VoteParams::default()).unwrap();
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].song, SongId(3));
        assert!(iv[0].t_start.abs() < 1e-9 && (iv[0].t_end() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn sixty_percent_window_is_unassigned() {
        let mut m: Vec<_> = (0..6).map(|i| mf(1, i as f64, 0.0, 1.0, 0)).collect();
        m.extend((0..4).map(|i| mf(2, 6.0 + i as f64 * 0.5, 0.0, 1.0, 0)));
        assert!(vote_windows(&m, 10.0, &VoteParams::default()).unwrap().is_empty());
        m.pop();
        m.pop();
        m.push(mf(1, 9.5, 0.0, 1.0, 0));
        // 7 of 9
        assert_eq!(vote_windows(&m, 10.0, &VoteParams::default()).unwrap().len(), 1);
    }

    #[test]
    fn too_few_matches_do_not_vote() {
        let m = [mf(1, 1.0, 0.0, 1.0, 0), mf(1, 2.0, 0.0, 1.0, 0)];
        assert!(vote_windows(&m, 10.0, &VoteParams::default()).unwrap().is_empty());
        assert!(vote_windows(&m, 10.0, &VoteParams { r_frac: 0.5, ..Default::default() }).is_err());
    }

    #[test]
    fn two_songs_split_near_boundary() {
        let mut m = Vec::new();
        for i in 0..150 {
            m.push(mf(0, i as f64 * 0.2, 0.0, 1.0, 0));
            m.push(mf(1, 30.0 + i as f64 * 0.2, 0.0, 1.0, 0));
        }
        let iv = vote_windows(&m, 60.0, &VoteParams::default()).unwrap();
        assert_eq!(iv.len(), 2);
        assert_eq!((iv[0].song, iv[1].song), (SongId(0), SongId(1)));
        assert!((iv[0].t_end() - 30.0).abs() <= 10.0);
        assert!((iv[1].t_start - 30.0).abs() <= 10.0);
    }

    #[test]
    fn exact_line_is_recovered() {
        let m: Vec<_> = (0..40)
            .map(|i| {
                let t_db = 10.0 + i as f64 * 0.37;
                mf(2, 1.2 * t_db + 5.0, t_db, 1.2, 12)
            })
            .collect();
        let iv = Interval { song: SongId(2), t_start: 0.0, duration: 100.0 };
        let d = localize(&iv, &m, 288, &LocalizeParams::default()).unwrap();
        assert!((d.a - 1.2).abs() < 1e-9);
        assert!((d.b - 5.0).abs() < 1e-9);
        assert_eq!(d.dp, 12);
        assert_eq!(d.support, 40);
    }

    #[test]
    fn two_matches_are_insufficient() {
        let m = [mf(0, 1.0, 1.0, 1.0, 0), mf(0, 2.0, 2.0, 1.0, 0)];
        let iv = Interval { song: SongId(0), t_start: 0.0, duration: 10.0 };
        assert_eq!(
            localize(&iv, &m, 288, &LocalizeParams::default()),
            Err(Error::InsufficientSupport { found: 2, required: 5 })
        );
    }

    #[test]
    fn mode_prefers_smallest_on_ties() {
        assert_eq!(mode(&[5, 3, 5, 3, 9]), 3);
        assert_eq!(mode(&[7, 7, 7]), 7);
    }

    #[test]
    fn signed_pitch_shift() {
        let d = Detection {
            song: SongId(0),
            query_start: 0.0,
            query_end: 1.0,
            a: 1.0,
            b: 0.0,
            dp: 276,
            bins: 288,
            support: 5,
        };
        assert_eq!(d.dp_signed(), -12);
        assert_eq!(Detection { dp: 144, ..d }.dp_signed(), 144);
        assert_eq!(Detection { dp: 145, ..d }.dp_signed(), -143);
    }

    #[test]
    fn smoothing_preserves_mass_in_the_interior() {
        let mut h = vec![0.0; 21];
        h[10] = 1.0;
        let s = smooth(&h, 1.0);
        let total: f64 = s.iter().sum();
        let kernel_sum: f64 = (-3i32..=3).map(|k| (-(k * k) as f64 / 2.0).exp()).sum();
        assert!((total - kernel_sum).abs() < 1e-12);
        assert_eq!(argmax(&s), 10);
    }
}
