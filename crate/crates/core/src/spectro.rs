//! Hann-windowed short-time Fourier magnitudes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::fft::{Complex, Fft};
use crate::{AudioSignal, Error, Result};

/// Magnitude spectrogram, frame-major: `mag(bin, frame)` lives at
/// `frame * n_bins + bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    mags: Vec<f64>,
    n_bins: usize,
    n_frames: usize,
    window_len: usize,
    hop: usize,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn mag(&self, bin: usize, frame: usize) -> f64 {
        self.mags[frame * self.n_bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.mags[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    /// Window length in samples.
    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Hop in samples.
    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn bin_hz(&self) -> f64 {
        f64::from(self.sample_rate) / self.window_len as f64
    }

    pub fn frame_hop_s(&self) -> f64 {
        self.hop as f64 / f64::from(self.sample_rate)
    }

    pub fn window_len_s(&self) -> f64 {
        self.window_len as f64 / f64::from(self.sample_rate)
    }

    /// Time of the centre of frame 0, in seconds.
    pub fn first_center_s(&self) -> f64 {
        (self.window_len as f64 / 2.0) / f64::from(self.sample_rate)
    }
}

/// Window length and hop in samples for the given window duration and
/// overlap fraction. The hop rounds half away from zero (882 -> 221 at
/// 75% overlap).
pub fn frame_geometry(sample_rate: u32, window_len_s: f64, overlap_fraction: f64) -> Result<(usize, usize)> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidParameter("overlap_fraction must be in [0, 1)"));
    }
    let n = libm::round(window_len_s * f64::from(sample_rate));
    if !(n >= 2.0) {
        return Err(Error::InvalidParameter("window must span at least 2 samples"));
    }
    let n = n as usize;
    let hop = (libm::round(n as f64 * (1.0 - overlap_fraction)) as usize).max(1);
    Ok((n, hop))
}

pub fn stft_magnitude(sig: &AudioSignal, window_len_s: f64, overlap_fraction: f64) -> Result<Spectrogram> {
    let (n, hop) = frame_geometry(sig.sample_rate(), window_len_s, overlap_fraction)?;
    let x = sig.samples();
    if x.len() < n {
        return Err(Error::SignalTooShort { samples: x.len(), required: n });
    }
    let n_frames = (x.len() - n) / hop + 1;
    let n_bins = n / 2 + 1;
    let window: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64)).collect();

    let fft = Fft::new(n);
    let mut buf = vec![Complex::default(); n];
    let mut scratch = Vec::new();
    let mut mags = Vec::with_capacity(n_frames * n_bins);
    for f in 0..n_frames {
        let frame = &x[f * hop..f * hop + n];
        for ((b, s), w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.forward(&mut buf, &mut scratch);
        mags.extend(buf[..n_bins].iter().map(|c| libm::sqrt(c.norm_sqr())));
    }
    Ok(Spectrogram { mags, n_bins, n_frames, window_len: n, hop, sample_rate: sig.sample_rate() })
}
