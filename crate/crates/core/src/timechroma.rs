//! The chroma^n filter bank and the circular time-chroma image.
//!
//! Pitch `i` sits at `f0 * 2^(i/m)`. Pitches `n` octaves apart (`n * m`
//! indices) share a chroma bin, so the image has `n * m` rows and a pitch
//! shift of `d` steps is a circular shift of `d` rows.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaParams {
    /// Pitches per octave.
    pub m: u32,
    /// Octaves folded into one chroma period.
    pub n: u32,
    /// Lowest pitch in Hz; everything below it is dropped.
    pub f0: f64,
    /// Sample rate the spectrogram is computed at.
    pub fs: u32,
}

impl Default for ChromaParams {
    fn default() -> Self {
        ChromaParams { m: 72, n: 4, f0: 80.0, fs: 8820 }
    }
}

impl ChromaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::InvalidParameter("f0 must be positive"));
        }
        if self.m == 0 || self.n == 0 || self.m * self.n < 2 {
            return Err(Error::InvalidParameter("n * m must be at least 2"));
        }
        if self.fs == 0 || (1u64 << self.n.min(60)) as f64 * self.f0 >= f64::from(self.fs) / 2.0 {
            return Err(Error::InvalidParameter("2^n * f0 must stay below fs / 2"));
        }
        Ok(())
    }

    /// Number of chroma bins, `n * m`.
    pub fn bins(&self) -> usize {
        (self.n * self.m) as usize
    }

    pub fn pitch_freq(&self, i: i64) -> f64 {
        self.f0 * libm::exp2(i as f64 / f64::from(self.m))
    }

    /// Fractional pitch index of a frequency.
    pub fn pitch_of(&self, freq: f64) -> f64 {
        f64::from(self.m) * libm::log2(freq / self.f0)
    }

    /// Number of pitches from `f0` up to the Nyquist frequency.
    pub fn n_pitches(&self) -> usize {
        let nyq = f64::from(self.fs) / 2.0;
        libm::floor(self.pitch_of(nyq) + 1e-9) as usize + 1
    }
}

/// Flat-top cosine filter response at `x` pitch steps from the centre.
///
/// Weight 1 within a quarter step, then a `cos^2` taper that crosses 1/2 at
/// the midpoint between neighbours and reaches 0 three quarters of a step
/// out, so adjacent responses sum to exactly 1 where they overlap.
pub fn filter_shape(x: f64) -> f64 {
    let d = x.abs();
    if d <= 0.25 {
        1.0
    } else if d < 0.75 {
        let c = libm::cos(PI * (d - 0.25));
        c * c
    } else {
        0.0
    }
}

/// Mean of `f` over `[a, b]`, midpoint rule.
fn band_average(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const STEPS: usize = 64;
    let h = (b - a) / STEPS as f64;
    (0..STEPS).map(|j| f(a + (j as f64 + 0.5) * h)).sum::<f64>() / STEPS as f64
}

/// Sparse per-pitch weights over spectrogram bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchFilterBank {
    params: ChromaParams,
    bin_hz: f64,
    /// `filters[i]` holds `(bin, weight)` pairs sorted by bin.
    filters: Vec<Vec<(usize, f64)>>,
}

impl PitchFilterBank {
    pub fn new(params: ChromaParams, spec_bin_hz: f64) -> Result<Self> {
        params.validate()?;
        if !(spec_bin_hz > 0.0) {
            return Err(Error::InvalidParameter("spec_bin_hz must be positive"));
        }
        let n_pitches = params.n_pitches();
        let nyq = f64::from(params.fs) / 2.0;
        let n_spec_bins = libm::floor(nyq / spec_bin_hz) as usize + 1;
        let mut filters: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_pitches];

        // Bin k stands for a triangle of frequencies over [f - df, f + df];
        // neighbouring triangles sum to one, so every frequency's energy is
        // split between its two nearest bins. A pitch's weight on the bin is
        // its response averaged under that triangle. Below ~1 kHz bins are
        // wider than a pitch step and sampling the response at bin centres
        // alone would leave most pitches empty.
        for k in 0..n_spec_bins {
            let f = k as f64 * spec_bin_hz;
            let (lo_f, hi_f) = ((f - spec_bin_hz).max(params.f0), (f + spec_bin_hz).min(nyq));
            if hi_f <= lo_f {
                continue;
            }
            let (p_lo, p_hi) = (params.pitch_of(lo_f), params.pitch_of(hi_f));
            let first = libm::floor(p_lo - 0.75).max(0.0) as usize;
            let last = (libm::ceil(p_hi + 0.75) as usize).min(n_pitches - 1);
            for (i, filter) in filters.iter_mut().enumerate().take(last + 1).skip(first) {
                let tri = |nu: f64| 1.0 - ((nu - f) / spec_bin_hz).abs();
                let w = band_average(|nu| tri(nu) * filter_shape(params.pitch_of(nu) - i as f64), lo_f, hi_f)
                    * (hi_f - lo_f)
                    / spec_bin_hz;
                if w > 1e-12 {
                    filter.push((k, w));
                }
            }
        }

        Ok(PitchFilterBank { params, bin_hz: spec_bin_hz, filters })
    }

    pub fn params(&self) -> &ChromaParams {
        &self.params
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn n_pitches(&self) -> usize {
        self.filters.len()
    }

    pub fn filter(&self, pitch: usize) -> &[(usize, f64)] {
        &self.filters[pitch]
    }

    pub fn pitch_freq(&self, pitch: usize) -> f64 {
        self.params.pitch_freq(pitch as i64)
    }

    /// Fold pitch energies of every frame into chroma^n bins.
    pub fn apply(&self, spec: &Spectrogram) -> Result<TimeChromaImage> {
        if spec.sample_rate() != self.params.fs {
            return Err(Error::InvalidParameter("spectrogram rate differs from params.fs"));
        }
        if (spec.bin_hz() - self.bin_hz).abs() > 1e-9 * self.bin_hz {
            return Err(Error::InvalidParameter("spectrogram bin width differs from filter bank"));
        }
        let n_bins = self.params.bins();
        let mut values = vec![0.0; spec.n_frames() * n_bins];
        let mut energy = vec![0.0; spec.n_bins()];
        for t in 0..spec.n_frames() {
            for (e, m) in energy.iter_mut().zip(spec.frame(t)) {
                *e = m * m;
            }
            let col = &mut values[t * n_bins..(t + 1) * n_bins];
            for (i, filter) in self.filters.iter().enumerate() {
                let pitch_energy: f64 =
                    filter.iter().filter(|(k, _)| *k < energy.len()).map(|&(k, w)| w * energy[k]).sum();
                col[i % n_bins] += pitch_energy;
            }
        }
        Ok(TimeChromaImage {
            values,
            n_bins,
            n_frames: spec.n_frames(),
            frame_hop_s: spec.frame_hop_s(),
            first_center_s: spec.first_center_s(),
            params: self.params,
        })
    }
}

pub fn build_filter_bank(params: ChromaParams, spec_bin_hz: f64) -> Result<PitchFilterBank> {
    PitchFilterBank::new(params, spec_bin_hz)
}

pub fn compute_time_chroma(spec: &Spectrogram, params: ChromaParams) -> Result<TimeChromaImage> {
    PitchFilterBank::new(params, spec.bin_hz())?.apply(spec)
}

/// Chroma bins x frames, nonnegative, circular along the chroma axis.
/// Stored frame-major: `value(b, t)` is at `t * n_bins + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChromaImage {
    values: Vec<f64>,
    n_bins: usize,
    n_frames: usize,
    frame_hop_s: f64,
    first_center_s: f64,
    params: ChromaParams,
}

impl TimeChromaImage {
    /// Build an image from frame-major values. The bin count is taken from
    /// `params`.
    pub fn from_frames(values: Vec<f64>, params: ChromaParams, frame_hop_s: f64, first_center_s: f64) -> Result<Self> {
        let n_bins = params.bins();
        if n_bins == 0 || !values.len().is_multiple_of(n_bins) {
            return Err(Error::InvalidParameter("value count is not a multiple of n * m"));
        }
        if !(frame_hop_s > 0.0) {
            return Err(Error::InvalidParameter("frame_hop_s must be positive"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("image values must be finite and nonnegative"));
        }
        Ok(TimeChromaImage { n_frames: values.len() / n_bins, values, n_bins, frame_hop_s, first_center_s, params })
    }

    pub fn from_fn(
        params: ChromaParams,
        n_frames: usize,
        frame_hop_s: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let n_bins = params.bins();
        let mut values = Vec::with_capacity(n_bins * n_frames);
        for t in 0..n_frames {
            for b in 0..n_bins {
                values.push(f(b, t));
            }
        }
        Self::from_frames(values, params, frame_hop_s, 0.0)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.frame_hop_s
    }

    pub fn params(&self) -> &ChromaParams {
        &self.params
    }

    #[inline]
    pub fn get(&self, b: usize, t: usize) -> f64 {
        self.values[t * self.n_bins + b]
    }

    /// Value with circular chroma index and zero outside the time range.
    #[inline]
    pub fn get_wrapped(&self, b: i64, t: i64) -> f64 {
        if t < 0 || t >= self.n_frames as i64 {
            return 0.0;
        }
        let b = b.rem_euclid(self.n_bins as i64) as usize;
        self.values[t as usize * self.n_bins + b]
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Centre time of `frame` in seconds.
    pub fn time_of(&self, frame: usize) -> f64 {
        self.first_center_s + frame as f64 * self.frame_hop_s
    }

    pub fn first_center_s(&self) -> f64 {
        self.first_center_s
    }

    /// Rotate along the chroma axis: `out(b, t) = in((b - delta) mod B, t)`.
    pub fn circular_shift(&self, delta_bins: i64) -> TimeChromaImage {
        let b_len = self.n_bins;
        let shift = delta_bins.rem_euclid(b_len as i64) as usize;
        let mut values = vec![0.0; self.values.len()];
        for t in 0..self.n_frames {
            let src = self.column(t);
            let dst = &mut values[t * b_len..(t + 1) * b_len];
            dst[shift..].copy_from_slice(&src[..b_len - shift]);
            dst[..shift].copy_from_slice(&src[b_len - shift..]);
        }
        TimeChromaImage { values, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectro::stft_magnitude;
    use crate::AudioSignal;

    fn tone(freq: f64, secs: f64) -> AudioSignal {
        let fs = 8820;
        let n = (secs * fs as f64) as usize;
        let s = (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs as f64).sin()).collect();
        AudioSignal::new(s, fs).unwrap()
    }

    fn image_of(sig: &AudioSignal) -> TimeChromaImage {
        let spec = stft_magnitude(sig, 0.1, 0.75).unwrap();
        compute_time_chroma(&spec, ChromaParams::default()).unwrap()
    }

    fn argmax(col: &[f64]) -> usize {
        (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap()
    }

    #[test]
    fn pitch_frequencies() {
        let p = ChromaParams::default();
        assert_eq!(p.pitch_freq(0), 80.0);
        assert!((p.pitch_freq(72) - 160.0).abs() < 1e-12);
        assert_eq!(p.bins(), 288);
        assert_eq!(p.n_pitches(), 417);
    }

    #[test]
    fn params_validation() {
        assert!(ChromaParams::default().validate().is_ok());
        assert!(ChromaParams { f0: 0.0, ..Default::default() }.validate().is_err());
        assert!(ChromaParams { m: 1, n: 1, ..Default::default() }.validate().is_err());
        assert!(ChromaParams { n: 6, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn adjacent_filters_sum_to_one_at_midpoint() {
        assert!((filter_shape(0.5) + filter_shape(-0.5) - 1.0).abs() < 1e-9);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let s = filter_shape(x) + filter_shape(x - 1.0);
            assert!((s - 1.0).abs() < 1e-12, "x={x}");
        }
        assert_eq!(filter_shape(0.2), 1.0);
        assert_eq!(filter_shape(0.75), 0.0);
    }

    #[test]
    fn filter_bank_weights_are_bounded_and_nonempty() {
        let bank = build_filter_bank(ChromaParams::default(), 10.0).unwrap();
        let mut load = vec![0.0; 442];
        for i in 0..bank.n_pitches() {
            assert!(!bank.filter(i).is_empty(), "pitch {i} empty");
            for &(k, w) in bank.filter(i) {
                assert!(w > 0.0 && w <= 1.0);
                assert!(k as f64 * 10.0 >= 80.0);
                load[k] += w;
            }
        }
        assert!(load.iter().all(|&l| l <= 1.0 + 1e-9));
        // away from f0 and Nyquist every bin's energy is handed out in full
        for (k, &l) in load.iter().enumerate().take(438).skip(9) {
            assert!((l - 1.0).abs() < 1e-9, "bin {k}: {l}");
        }
    }

    #[test]
    fn low_tones_shift_covariantly() {
        let p = ChromaParams::default();
        let cos = |a: &[f64], b: &[f64]| {
            let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            ab / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|x| x * x).sum::<f64>()).sqrt()
        };
        for j in [120i64, 170, 200, 230] {
            let base = image_of(&tone(p.pitch_freq(j), 0.5));
            for d in [-12i64, -6, 6, 12] {
                let moved = image_of(&tone(p.pitch_freq(j + d), 0.5));
                let c = cos(moved.column(3), base.circular_shift(d).column(3));
                assert!(c > 0.95, "pitch {j} shift {d}: {c}");
            }
        }
    }

    #[test]
    fn tone_lands_on_its_chroma_bin() {
        let p = ChromaParams::default();
        for j in [250i64, 300, 340, 400] {
            let img = image_of(&tone(p.pitch_freq(j), 0.5));
            for t in 0..img.n_frames() {
                assert_eq!(argmax(img.column(t)), (j as usize) % 288, "pitch {j}");
            }
        }
    }

    #[test]
    fn n_octaves_up_folds_to_same_bin() {
        let p = ChromaParams::default();
        let lo = image_of(&tone(p.pitch_freq(110), 0.5));
        let hi = image_of(&tone(p.pitch_freq(110 + 288), 0.5));
        assert_eq!(argmax(lo.column(3)), argmax(hi.column(3)));
    }

    #[test]
    fn silence_maps_to_zero_image() {
        let img = image_of(&AudioSignal::new(vec![0.0; 8820], 8820).unwrap());
        assert!(img.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chroma_energy_never_exceeds_spectrum_energy() {
        let sig = tone(523.0, 0.5);
        let spec = stft_magnitude(&sig, 0.1, 0.75).unwrap();
        let img = compute_time_chroma(&spec, ChromaParams::default()).unwrap();
        for t in 0..img.n_frames() {
            let chroma: f64 = img.column(t).iter().sum();
            let total: f64 = spec.frame(t).iter().map(|m| m * m).sum();
            assert!(chroma <= total * (1.0 + 1e-12));
        }
    }

    #[test]
    fn circular_shift_group_laws() {
        let img = TimeChromaImage::from_fn(ChromaParams::default(), 5, 0.025, |b, t| (b * 7 + t) as f64).unwrap();
        assert_eq!(img.circular_shift(0), img);
        assert_eq!(img.circular_shift(288), img);
        assert_eq!(img.circular_shift(12).circular_shift(-12), img);
        let s = img.circular_shift(5);
        assert_eq!(s.get(5, 2), img.get(0, 2));
        assert_eq!(s.get(2, 1), img.get(285, 1));
    }
}
