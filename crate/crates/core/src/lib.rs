//! Time-chroma audio fingerprinting and copy detection.
//!
//! The pipeline turns a mono [`AudioSignal`] into a magnitude [`Spectrogram`],
//! folds pitch energies into a circular [`TimeChromaImage`], picks stable
//! local maxima whose neighbourhood keeps matching the same dictionary
//! pattern across time scales, and describes each one with a normalized
//! low-frequency DCT block. Matching those descriptors against a
//! [`FingerprintDb`] and fitting `t_q = a * t_db + b` over the matches yields
//! song-level [`Detection`]s together with the tempo factor and pitch shift
//! that were applied to the copy.
//!
//! Pitch shift moves the image circularly along the chroma axis and tempo
//! change stretches it along time, which is what makes the features
//! invariant to both.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, WAV decoding
//! and the command-line front end live in the `tchroma` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod attacks;
pub mod config;
mod dct;
mod error;
pub mod features;
mod fft;
pub mod identify;
pub mod index;
mod kmeans;
pub mod pipeline;
pub mod signal;
pub mod spectro;
pub mod timechroma;

pub use config::Config;
pub use error::{Error, Result};
pub use features::{FeaturePoint, Fingerprint, PatternDictionary};
pub use identify::{Detection, Interval, MatchedFeature};
pub use index::{FingerprintDb, MatchMode, MatchPair, SongId, SongMeta};
pub use signal::AudioSignal;
pub use spectro::Spectrogram;
pub use timechroma::{ChromaParams, PitchFilterBank, TimeChromaImage};
