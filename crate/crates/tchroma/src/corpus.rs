//! Corpus directories: WAV listing and the manifest of synthetic songs.
//!
//! A synthetic corpus directory holds `song_NNN.wav` files plus
//! `corpus.tsv`, one `file<TAB>seed<TAB>length_s` line per song, from which
//! the scores can be regenerated exactly for attack simulation.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tchroma_core::attacks::{generate_score, SyntheticScore};
use tchroma_core::ChromaParams;

use crate::error::{Error, IoContext, Result};
use crate::wav::{write_wav, SampleFormat};

pub const MANIFEST: &str = "corpus.tsv";

/// `*.wav` files directly inside `dir`, sorted by file name.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).at(dir)? {
        let p = e.at(dir)?.path();
        if p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub seed: u64,
    pub length_s: f64,
}

impl ManifestEntry {
    pub fn score(&self, params: ChromaParams) -> Result<SyntheticScore> {
        Ok(generate_score(self.seed, self.length_s, params)?)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).at(&path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("{}:{}: `{line}`", path.display(), no + 1));
        let f: Vec<&str> = line.split('\t').collect();
        let [file, seed, len] = f[..] else { return Err(bad()) };
        out.push(ManifestEntry {
            file: file.to_string(),
            seed: seed.parse().map_err(|_| bad())?,
            length_s: len.parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Render `count` songs with seeds `seed, seed + 1, ...` into `dir` and write
/// the manifest.
pub fn synth_corpus(
    dir: &Path,
    count: usize,
    length_s: f64,
    seed: u64,
    params: ChromaParams,
    format: SampleFormat,
) -> Result<Vec<ManifestEntry>> {
    std::fs::create_dir_all(dir).at(dir)?;
    let entries: Vec<ManifestEntry> = (0..count)
        .map(|i| ManifestEntry { file: format!("song_{i:03}.wav"), seed: seed + i as u64, length_s })
        .collect();
    entries.par_iter().try_for_each(|e| write_wav(&dir.join(&e.file), &e.score(params)?.render(), format))?;
    let mut text = String::from("#file\tseed\tlength_s\n");
    for e in &entries {
        text.push_str(&format!("{}\t{}\t{:?}\n", e.file, e.seed, e.length_s));
    }
    crate::write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(entries)
}
