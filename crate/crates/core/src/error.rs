use thiserror::Error;

use crate::index::SongId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("signal too short: {samples} samples, need at least {required}")]
    SignalTooShort { samples: usize, required: usize },
    #[error("patch is constant, no descriptor can be formed")]
    DegeneratePatch,
    #[error("corpus yielded {found} patches, need at least {required}")]
    InsufficientPatches { found: usize, required: usize },
    #[error("song id {0} is already present")]
    DuplicateSongId(SongId),
    #[error("descriptor layout mismatch: expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("only {found} features support the interval, need {required}")]
    InsufficientSupport { found: usize, required: usize },
    #[error("shifted pitch leaves the representable band")]
    OutOfBand,
    #[error("signal is silent, SNR is undefined")]
    SilentSignal,
}
