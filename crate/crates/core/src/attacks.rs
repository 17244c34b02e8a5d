//! Seeded synthetic songs and the attacks used to test robustness.
//!
//! Songs are additive renders of random note lists, so pitch shift and tempo
//! change are exact re-renders of a transformed score. Speed change
//! resamples the rendered audio and therefore works on any signal.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::signal::resample_ratio;
use crate::{AudioSignal, ChromaParams, Error, Result, SongId};

/// Peak level of a rendered song.
const RENDER_PEAK: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Note {
    /// Pitch index, frequency `f0 * 2^(pitch / m)`.
    pub pitch: i64,
    pub onset_s: f64,
    pub duration_s: f64,
    pub amplitude: f64,
    pub harmonics: u32,
    /// Share of the note spent in the raised-cosine attack and release
    /// ramps; 1 is a full Hann bump, smaller values add a flat sustain.
    pub taper: f64,
}

/// Ranges the random score generator draws from. Every range is inclusive
/// of its lower end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SongStyle {
    pub notes_per_s: (f64, f64),
    pub duration_s: (f64, f64),
    /// Fundamentals are drawn on the semitone grid inside this band.
    pub band_hz: (f64, f64),
    pub harmonics: (u32, u32),
    pub taper: (f64, f64),
    /// Onsets snap to multiples of this many seconds.
    pub onset_grid_s: Option<f64>,
}

impl Default for SongStyle {
    fn default() -> Self {
        SongStyle {
            notes_per_s: (2.0, 6.0),
            duration_s: (0.15, 0.9),
            band_hz: (110.0, 660.0),
            harmonics: (3, 6),
            taper: (1.0, 1.0),
            onset_grid_s: None,
        }
    }
}

impl SongStyle {
    fn validate(&self) -> Result<()> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !(ok(self.notes_per_s) && ok(self.duration_s) && ok(self.band_hz) && ok(self.taper))
            || self.notes_per_s.0 <= 0.0
            || self.duration_s.0 <= 0.0
            || self.band_hz.0 <= 0.0
            || !(self.taper.0 > 0.0 && self.taper.1 <= 1.0)
            || self.harmonics.0 == 0
            || self.harmonics.0 > self.harmonics.1
            || self.onset_grid_s.is_some_and(|g| !(g > 0.0))
        {
            return Err(Error::InvalidParameter("song style ranges must be positive and ordered"));
        }
        Ok(())
    }
}

/// Raised-cosine envelope with flat sustain, `x` in `[0, 1)`.
fn envelope(x: f64, taper: f64) -> f64 {
    let ramp = taper / 2.0;
    let y = if x < ramp {
        x / ramp
    } else if x > 1.0 - ramp {
        (1.0 - x) / ramp
    } else {
        return 1.0;
    };
    let s = libm::sin(PI * y / 2.0);
    s * s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScore {
    pub notes: Vec<Note>,
    pub seed: u64,
    pub length_s: f64,
    pub params: ChromaParams,
}

impl SyntheticScore {
    pub fn empty(length_s: f64, params: ChromaParams) -> Self {
        SyntheticScore { notes: Vec::new(), seed: 0, length_s, params }
    }

    fn in_band(&self, shift: i64) -> bool {
        let nyq = f64::from(self.params.fs) / 2.0;
        self.notes
            .iter()
            .all(|n| n.pitch + shift >= 0 && self.params.pitch_freq(n.pitch + shift) * f64::from(n.harmonics) < nyq)
    }

    /// Every pitch moved by `delta` steps.
    pub fn pitch_shifted(&self, delta: i64) -> Result<SyntheticScore> {
        if !self.in_band(delta) {
            return Err(Error::OutOfBand);
        }
        let mut out = self.clone();
        for n in &mut out.notes {
            n.pitch += delta;
        }
        Ok(out)
    }

    /// Onsets and durations divided by `factor`: tempo rises by `factor`.
    pub fn tempo_scaled(&self, factor: f64) -> Result<SyntheticScore> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter("tempo factor must be positive"));
        }
        let mut out = self.clone();
        out.length_s = self.length_s / factor;
        for n in &mut out.notes {
            n.onset_s /= factor;
            n.duration_s /= factor;
        }
        Ok(out)
    }

    /// Additive render with raised-cosine note envelopes and `1/h` harmonic
    /// amplitudes, scaled to a fixed peak.
    pub fn render(&self) -> AudioSignal {
        let fs = self.params.fs;
        let rate = f64::from(fs);
        let len = libm::round(self.length_s * rate) as usize;
        let mut out = vec![0.0; len];
        for note in &self.notes {
            let start = libm::round(note.onset_s * rate) as usize;
            let n = libm::round(note.duration_s * rate) as usize;
            let f = self.params.pitch_freq(note.pitch);
            for i in 0..n {
                let idx = start + i;
                if idx >= len {
                    break;
                }
                let env = envelope(i as f64 / n as f64, note.taper);
                let tau = i as f64 / rate;
                let mut v = 0.0;
                for h in 1..=note.harmonics {
                    let hf = f64::from(h);
                    v += libm::sin(2.0 * PI * f * hf * tau) / hf;
                }
                out[idx] += note.amplitude * env * v;
            }
        }
        let peak = out.iter().fold(0.0, |m: f64, &v: &f64| m.max(v.abs()));
        if peak > 0.0 {
            let g = RENDER_PEAK / peak;
            out.iter_mut().for_each(|v| *v *= g);
        }
        AudioSignal::new(out, fs).expect("render produces finite samples")
    }
}

/// Deterministic random song in the default [`SongStyle`]: 2-6 notes per
/// second, 3-6 harmonics each, fundamentals between 110 and 660 Hz.
pub fn generate_score(seed: u64, length_s: f64, params: ChromaParams) -> Result<SyntheticScore> {
    generate_score_styled(seed, length_s, params, &SongStyle::default())
}

pub fn generate_score_styled(
    seed: u64,
    length_s: f64,
    params: ChromaParams,
    style: &SongStyle,
) -> Result<SyntheticScore> {
    params.validate()?;
    style.validate()?;
    if !(length_s >= 10.0) {
        return Err(Error::InvalidParameter("songs must be at least 10 s long"));
    }
    if style.duration_s.1 >= length_s {
        return Err(Error::InvalidParameter("notes longer than the song"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let semitone = if params.m.is_multiple_of(12) { i64::from(params.m / 12) } else { 1 };
    let lo = libm::ceil(params.pitch_of(style.band_hz.0) / semitone as f64) as i64;
    let hi = libm::floor(params.pitch_of(style.band_hz.1) / semitone as f64) as i64;
    if hi < lo.max(0) {
        return Err(Error::InvalidParameter("no pitch fits the fundamental band"));
    }
    let nyq = f64::from(params.fs) / 2.0;
    let draw = |rng: &mut ChaCha8Rng, (a, b): (f64, f64)| if a < b { rng.random_range(a..b) } else { a };

    let notes_per_s = draw(&mut rng, style.notes_per_s);
    let count = libm::round(notes_per_s * length_s) as usize;
    let mut notes = Vec::with_capacity(count);
    for _ in 0..count {
        let pitch = rng.random_range(lo.max(0)..=hi) * semitone;
        let duration_s = draw(&mut rng, style.duration_s);
        let mut onset_s = rng.random_range(0.0..length_s - duration_s);
        if let Some(g) = style.onset_grid_s {
            onset_s = (libm::floor(onset_s / g) * g).max(0.0);
        }
        let amplitude = rng.random_range(0.3..1.0);
        let taper = draw(&mut rng, style.taper);
        let f = params.pitch_freq(pitch);
        let max_h = (libm::ceil(nyq / f) as u32).saturating_sub(1).max(1);
        let harmonics = rng.random_range(style.harmonics.0..=style.harmonics.1).min(max_h);
        notes.push(Note { pitch, onset_s, duration_s, amplitude, harmonics, taper });
    }
    notes.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    Ok(SyntheticScore { notes, seed, length_s, params })
}

pub fn generate_song(seed: u64, length_s: f64, params: ChromaParams) -> Result<(SyntheticScore, AudioSignal)> {
    let score = generate_score(seed, length_s, params)?;
    let audio = score.render();
    Ok((score, audio))
}

pub fn attack_pitch_shift(score: &SyntheticScore, delta_p: i64) -> Result<AudioSignal> {
    Ok(score.pitch_shifted(delta_p)?.render())
}

pub fn attack_tempo(score: &SyntheticScore, factor: f64) -> Result<AudioSignal> {
    Ok(score.tempo_scaled(factor)?.render())
}

/// Playback-rate change: duration divided by `factor`, every frequency
/// multiplied by it.
pub fn attack_speed(sig: &AudioSignal, factor: f64) -> Result<AudioSignal> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidParameter("speed factor must be positive"));
    }
    if factor == 1.0 {
        return Ok(sig.clone());
    }
    AudioSignal::new(resample_ratio(sig.samples(), 1.0 / factor), sig.sample_rate())
}

/// Add white Gaussian noise scaled to exactly `snr_db`. An infinite SNR
/// returns the input unchanged.
pub fn attack_noise(sig: &AudioSignal, snr_db: f64, seed: u64) -> Result<AudioSignal> {
    if snr_db == f64::INFINITY {
        return Ok(sig.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter("snr_db must be finite or +inf"));
    }
    let p_sig = sig.power();
    if !(p_sig > 0.0) {
        return Err(Error::SilentSignal);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<f64> = (0..sig.len()).map(|_| rng.sample(StandardNormal)).collect();
    let p_noise = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
    let gain = libm::sqrt(p_sig / libm::pow(10f64, snr_db / 10.0) / p_noise);
    for (n, s) in noise.iter_mut().zip(sig.samples()) {
        *n = s + *n * gain;
    }
    AudioSignal::new(noise, sig.sample_rate())
}

/// Concatenated snippets and where each landed, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Mashup {
    pub signal: AudioSignal,
    pub spans: Vec<(f64, f64)>,
}

/// Concatenate `(snippet, gap_before_s)` pairs.
pub fn mashup(parts: &[(AudioSignal, f64)]) -> Result<Mashup> {
    let Some((first, _)) = parts.first() else {
        return Err(Error::InvalidParameter("mashup needs at least one snippet"));
    };
    let fs = first.sample_rate();
    let rate = f64::from(fs);
    let mut samples = Vec::new();
    let mut spans = Vec::with_capacity(parts.len());
    for (sig, gap) in parts {
        if sig.sample_rate() != fs {
            return Err(Error::InvalidParameter("snippets must share a sample rate"));
        }
        if !(*gap >= 0.0) {
            return Err(Error::InvalidParameter("gaps must be nonnegative"));
        }
        samples.resize(samples.len() + libm::round(gap * rate) as usize, 0.0);
        let start = samples.len() as f64 / rate;
        samples.extend_from_slice(sig.samples());
        spans.push((start, samples.len() as f64 / rate));
    }
    Ok(Mashup { signal: AudioSignal::new(samples, fs)?, spans })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attack {
    None,
    /// Tempo raised by the factor, pitches unchanged.
    Tempo(f64),
    /// Pitch moved by this many steps.
    Pitch(i64),
    /// Playback rate multiplied by the factor.
    Speed(f64),
    /// White noise at this SNR in dB.
    Noise(f64),
}

impl Attack {
    /// Slope of `t_q = a * t_db + b` this attack produces.
    pub fn time_slope(&self) -> f64 {
        match *self {
            Attack::Tempo(k) | Attack::Speed(k) => 1.0 / k,
            _ => 1.0,
        }
    }

    /// Pitch shift in steps of `1/m` octave (nearest step for speed).
    pub fn pitch_steps(&self, m: u32) -> i64 {
        match *self {
            Attack::Pitch(d) => d,
            Attack::Speed(s) => libm::round(f64::from(m) * libm::log2(s)) as i64,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnippetSpec {
    /// Index into the song list handed to [`attacked_mashup`].
    pub song: usize,
    pub db_start: f64,
    pub length: f64,
}

/// Ground truth for one snippet of a mash-up query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnippetTruth {
    pub song: SongId,
    pub query_start: f64,
    pub query_end: f64,
    pub db_start: f64,
    pub db_end: f64,
    pub a: f64,
    pub b: f64,
    /// Pitch shift in steps, signed.
    pub dp: i64,
}

/// Pick `count` distinct songs and a random `[min_len, max_len]` excerpt of
/// each.
pub fn plan_mashup(
    song_lengths: &[f64],
    count: usize,
    min_len: f64,
    max_len: f64,
    seed: u64,
) -> Result<Vec<SnippetSpec>> {
    if count > song_lengths.len() {
        return Err(Error::InvalidParameter("more snippets than songs"));
    }
    if !(min_len > 0.0 && max_len >= min_len) {
        return Err(Error::InvalidParameter("bad snippet length range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..song_lengths.len()).collect();
    order.shuffle(&mut rng);
    order
        .into_iter()
        .take(count)
        .map(|song| {
            let length = rng.random_range(min_len..=max_len);
            let room = song_lengths[song] - length;
            if room < 0.0 {
                return Err(Error::InvalidParameter("song shorter than snippet"));
            }
            let db_start = rng.random_range(0.0..=room);
            Ok(SnippetSpec { song, db_start, length })
        })
        .collect()
}

/// Render each planned snippet under `attack`, concatenate them without
/// gaps, and report where every snippet ended up.
pub fn attacked_mashup(
    songs: &[(SongId, SyntheticScore)],
    plan: &[SnippetSpec],
    attack: Attack,
    noise_seed: u64,
) -> Result<(AudioSignal, Vec<SnippetTruth>)> {
    let mut parts = Vec::with_capacity(plan.len());
    let mut cuts = Vec::with_capacity(plan.len());
    for spec in plan {
        let (_, score) = songs.get(spec.song).ok_or(Error::InvalidParameter("snippet refers to a missing song"))?;
        let (full, time_factor) = match attack {
            Attack::Tempo(k) => (attack_tempo(score, k)?, k),
            Attack::Pitch(d) => (attack_pitch_shift(score, d)?, 1.0),
            Attack::Speed(s) => (attack_speed(&score.render(), s)?, s),
            Attack::None | Attack::Noise(_) => (score.render(), 1.0),
        };
        let rate = f64::from(full.sample_rate());
        let lo = libm::round(spec.db_start / time_factor * rate) / rate;
        let hi = libm::round((spec.db_start + spec.length) / time_factor * rate) / rate;
        parts.push((full.slice_seconds(lo, hi), 0.0));
        cuts.push((lo, time_factor));
    }
    let mixed = mashup(&parts)?;
    let m = songs.first().map(|s| s.1.params.m).unwrap_or(72);
    let truth = plan
        .iter()
        .zip(&cuts)
        .zip(&mixed.spans)
        .map(|((spec, &(att_start, k)), &(q0, q1))| SnippetTruth {
            song: songs[spec.song].0,
            query_start: q0,
            query_end: q1,
            db_start: att_start * k,
            db_end: (att_start + (q1 - q0)) * k,
            a: 1.0 / k,
            b: q0 - att_start,
            dp: attack.pitch_steps(m),
        })
        .collect();
    let signal = match attack {
        Attack::Noise(snr) => attack_noise(&mixed.signal, snr, noise_seed)?,
        _ => mixed.signal,
    };
    Ok((signal, truth))
}
