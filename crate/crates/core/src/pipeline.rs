//! Signal to fingerprints in one call, using a [`Config`].

use alloc::vec::Vec;

use crate::features::{detect_features, fingerprint_features};
use crate::signal::resample;
use crate::spectro::stft_magnitude;
use crate::timechroma::compute_time_chroma;
use crate::{AudioSignal, Config, Error, Fingerprint, PatternDictionary, Result, TimeChromaImage};

/// Resample to `cfg.fs` if needed, then STFT and chroma folding.
pub fn time_chroma(sig: &AudioSignal, cfg: &Config) -> Result<TimeChromaImage> {
    let params = cfg.chroma();
    params.validate()?;
    let spec = if sig.sample_rate() == cfg.fs {
        stft_magnitude(sig, cfg.window_s, cfg.overlap)?
    } else {
        stft_magnitude(&resample(sig, cfg.fs)?, cfg.window_s, cfg.overlap)?
    };
    compute_time_chroma(&spec, params)
}

/// Stable feature points of `img`, each with its descriptor.
pub fn image_fingerprints(img: &TimeChromaImage, dict: &PatternDictionary, cfg: &Config) -> Result<Vec<Fingerprint>> {
    let params = cfg.chroma();
    if dict.m() != params.m || dict.n() != params.n || dict.q() != cfg.q || dict.r() != cfg.r {
        return Err(Error::InvalidParameter("dictionary was built with different m, n, q or r"));
    }
    let points = detect_features(img, dict, &cfg.detect_features())?;
    Ok(fingerprint_features(img, &points, cfg.q, cfg.r))
}

pub fn fingerprint_signal(sig: &AudioSignal, dict: &PatternDictionary, cfg: &Config) -> Result<Vec<Fingerprint>> {
    image_fingerprints(&time_chroma(sig, cfg)?, dict, cfg)
}
