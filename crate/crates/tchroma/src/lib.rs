//! File formats, WAV IO, evaluation harness and command implementations
//! around [`tchroma_core`].

use std::io::Write;
use std::path::Path;

mod codec;
pub mod commands;
pub mod configfile;
pub mod corpus;
pub mod dbfile;
pub mod dictfile;
mod error;
pub mod evaluate;
pub mod report;
pub mod wav;

pub use error::{Error, Result};
pub use tchroma_core as core;

use error::IoContext;

/// Write `bytes` to a temporary file beside `path`, then rename it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).at(dir)?;
    tmp.write_all(bytes).at(path)?;
    tmp.as_file().sync_all().at(path)?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
