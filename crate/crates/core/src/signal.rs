//! Mono sample buffers and band-limited resampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// Mono PCM signal with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample_rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("samples must be finite"));
        }
        Ok(AudioSignal { samples, sample_rate })
    }

    pub fn silence(duration_s: f64, sample_rate: u32) -> Result<Self> {
        let len = libm::round(duration_s * f64::from(sample_rate)).max(0.0) as usize;
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Mean power, `sum(x^2) / len`.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Samples in `[start_s, end_s)`, clipped to the signal.
    pub fn slice_seconds(&self, start_s: f64, end_s: f64) -> AudioSignal {
        let rate = f64::from(self.sample_rate);
        let lo = (libm::round(start_s * rate).max(0.0) as usize).min(self.samples.len());
        let hi = (libm::round(end_s * rate).max(0.0) as usize).clamp(lo, self.samples.len());
        AudioSignal { samples: self.samples[lo..hi].to_vec(), sample_rate: self.sample_rate }
    }
}

/// Taps per polyphase branch, counted at the lower of the two rates.
const TAPS: usize = 32;
/// Sub-sample phases stored in the kernel table; intermediate phases are
/// interpolated linearly.
const PHASES: usize = 1024;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower sample rate.
const CUTOFF: f64 = 0.45;

/// Band-limited resampling to `target_rate`.
pub fn resample(sig: &AudioSignal, target_rate: u32) -> Result<AudioSignal> {
    if target_rate == 0 {
        return Err(Error::InvalidParameter("target_rate must be positive"));
    }
    if target_rate == sig.sample_rate {
        return Ok(sig.clone());
    }
    let ratio = f64::from(target_rate) / f64::from(sig.sample_rate);
    Ok(AudioSignal { samples: resample_ratio(&sig.samples, ratio), sample_rate: target_rate })
}

/// Resample by an arbitrary `out_rate / in_rate` ratio using a Kaiser
/// windowed-sinc kernel. Output length is `round(len * ratio)`.
pub(crate) fn resample_ratio(input: &[f64], ratio: f64) -> Vec<f64> {
    assert!(ratio > 0.0 && ratio.is_finite());
    let out_len = libm::round(input.len() as f64 * ratio) as usize;
    if input.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let kernel = SincKernel::new(ratio);
    let step = 1.0 / ratio;
    (0..out_len).map(|n| kernel.apply(input, n as f64 * step)).collect()
}

struct SincKernel {
    /// Kernel sampled at `PHASES` points per input sample over `[0, half_width]`.
    table: Vec<f64>,
    half_width: f64,
}

impl SincKernel {
    fn new(ratio: f64) -> Self {
        // Work in input-sample units. When downsampling the kernel widens by
        // 1/ratio so the tap count stays fixed at the output rate.
        let stretch = (1.0 / ratio).max(1.0);
        let half_width = (TAPS as f64 / 2.0) * stretch;
        let fc = CUTOFF / stretch; // cycles per input sample
        let n = libm::ceil(half_width * PHASES as f64) as usize + 2;
        let i0_beta = bessel_i0(KAISER_BETA);
        let table = (0..n)
            .map(|j| {
                let x = j as f64 / PHASES as f64;
                if x >= half_width {
                    return 0.0;
                }
                let u = x / half_width;
                let window = bessel_i0(KAISER_BETA * libm::sqrt((1.0 - u * u).max(0.0))) / i0_beta;
                2.0 * fc * sinc(2.0 * fc * x) * window
            })
            .collect();
        SincKernel { table, half_width }
    }

    #[inline]
    fn weight(&self, x: f64) -> f64 {
        let pos = x.abs() * PHASES as f64;
        let i = libm::floor(pos) as usize;
        if i + 1 >= self.table.len() {
            return 0.0;
        }
        let frac = pos - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }

    fn apply(&self, input: &[f64], pos: f64) -> f64 {
        let lo = libm::ceil(pos - self.half_width).max(0.0) as usize;
        let hi = (libm::floor(pos + self.half_width) as usize).min(input.len() - 1);
        (lo..=hi).map(|k| input[k] * self.weight(pos - k as f64)).sum()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        libm::sin(px) / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= y / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64, amp: f64) -> AudioSignal {
        let n = (secs * f64::from(rate)) as usize;
        let s = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin()).collect();
        AudioSignal::new(s, rate).unwrap()
    }

    /// Plain O(N * K) DFT magnitude peak over `[lo, hi)` Hz, one bin per Hz
    /// resolution of the record length.
    fn dft_peak_hz(x: &[f64], rate: u32) -> f64 {
        let n = x.len();
        let bin_hz = f64::from(rate) / n as f64;
        let mut best = (0usize, 0.0);
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let ph = 2.0 * PI * (k * i % n) as f64 / n as f64;
                re += v * ph.cos();
                im -= v * ph.sin();
            }
            let m = re * re + im * im;
            if m > best.1 {
                best = (k, m);
            }
        }
        best.0 as f64 * bin_hz
    }

    #[test]
    fn rejects_bad_signals() {
        assert!(AudioSignal::new(vec![0.0], 0).is_err());
        assert!(AudioSignal::new(vec![f64::NAN], 8000).is_err());
        assert!(resample(&AudioSignal::new(vec![0.0], 8000).unwrap(), 0).is_err());
    }

    #[test]
    fn same_rate_is_identity() {
        let s = sine(440.0, 8820, 0.5, 0.7);
        assert_eq!(resample(&s, 8820).unwrap(), s);
    }

    #[test]
    fn downsample_keeps_tone_frequency() {
        let s = sine(440.0, 44100, 1.0, 0.8);
        let out = resample(&s, 8820).unwrap();
        assert_eq!(out.sample_rate(), 8820);
        // 1 s record -> 1 Hz bins
        let peak = dft_peak_hz(out.samples(), 8820);
        assert!((peak - 440.0).abs() <= 1.0, "peak at {peak}");
    }

    #[test]
    fn output_length_tracks_duration() {
        let s = AudioSignal::new(vec![0.0; 60 * 44100], 44100).unwrap();
        let out = resample(&s, 8820).unwrap();
        assert!((out.len() as i64 - 529_200).abs() <= 1);
    }

    #[test]
    fn passband_amplitude_within_one_percent() {
        for &(src, dst, f) in &[(44100u32, 8820u32, 1000.0), (8820, 22050, 2000.0), (8820, 9702, 1500.0)] {
            let s = sine(f, src, 1.0, 0.5);
            let out = resample(&s, dst).unwrap();
            let x = out.samples();
            // skip the kernel's edge transients
            let mid = &x[x.len() / 4..3 * x.len() / 4];
            let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
            let amp = rms * 2f64.sqrt();
            assert!((amp - 0.5).abs() < 0.005, "{src}->{dst} {f} Hz: amp {amp}");
        }
    }

    #[test]
    fn kaiser_kernel_is_unity_gain_at_dc() {
        let dc = AudioSignal::new(vec![0.25; 4000], 8000).unwrap();
        let out = resample(&dc, 11025).unwrap();
        let mid = &out.samples()[1000..4000];
        for v in mid {
            assert!((v - 0.25).abs() < 1e-3);
        }
    }
}
