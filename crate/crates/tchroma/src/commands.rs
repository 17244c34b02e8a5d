//! The work behind each subcommand, separate from argument parsing so it
//! can be driven from tests.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tchroma_core::attacks::{attacked_mashup, plan_mashup, Attack, SnippetTruth, SyntheticScore};
use tchroma_core::features::{build_dictionary, DictionaryBuild};
use tchroma_core::identify::detect;
use tchroma_core::pipeline::{fingerprint_signal, time_chroma};
use tchroma_core::{AudioSignal, Config, Detection, FingerprintDb, SongId, SongMeta};

use crate::corpus::{list_wavs, read_manifest};
use crate::error::{Error, IoContext, Result};
use crate::evaluate::{evaluate, EvalSettings, LevelResult};
use crate::wav::{decode_wav, load_wav, write_wav, SampleFormat};
use crate::{dbfile, dictfile, report};

fn nonempty_corpus(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let files = list_wavs(dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!("{}: no WAV files", dir.display())));
    }
    Ok(files)
}

/// Learn the pattern dictionary from every WAV in `corpus` and write it to
/// `out`. Nothing is written on failure.
pub fn build_dict(corpus: &Path, out: &Path, cfg: &Config) -> Result<DictionaryBuild> {
    let files = nonempty_corpus(corpus)?;
    let images =
        files.par_iter().map(|f| time_chroma(&load_wav(f)?, cfg).map_err(Error::from)).collect::<Result<Vec<_>>>()?;
    let build = build_dictionary(&images, &cfg.dictionary())?;
    dictfile::save(out, &build.dictionary)?;
    Ok(build)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestSummary {
    pub added: Vec<(SongId, String, usize)>,
    /// Files whose content is already in the database.
    pub skipped: Vec<String>,
}

/// Add every WAV in `corpus` not already present (by SHA-256 of the file)
/// to the database at `db_path`, creating it if needed.
pub fn ingest(corpus: &Path, dict_path: &Path, db_path: &Path, cfg: &Config) -> Result<IngestSummary> {
    let dict = dictfile::load(dict_path)?;
    let mut db = if db_path.exists() { dbfile::load(db_path)? } else { FingerprintDb::new(cfg.q, cfg.r, cfg.m, cfg.n) };
    if (db.q(), db.r(), db.m(), db.n()) != (dict.q(), dict.r(), dict.m(), dict.n()) {
        return Err(Error::Data("database and dictionary were built with different geometry".into()));
    }
    let files = nonempty_corpus(corpus)?;
    let loaded = files
        .par_iter()
        .map(|f| {
            let bytes = std::fs::read(f).at(f)?;
            let hash: [u8; 32] = Sha256::digest(&bytes).into();
            Ok((f, bytes, hash))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = IngestSummary::default();
    let mut fresh = Vec::new();
    for (f, bytes, hash) in loaded {
        let name = f.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let seen = db.find_by_hash(&hash).is_some() || fresh.iter().any(|(_, _, h)| *h == hash);
        if seen {
            summary.skipped.push(name);
        } else {
            fresh.push((name, bytes, hash));
        }
    }
    let prints = fresh
        .par_iter()
        .map(|(name, bytes, _)| {
            let sig = decode_wav(bytes).map_err(|e| Error::Data(format!("{name}: {e}")))?;
            Ok((sig.duration_s(), fingerprint_signal(&sig, &dict, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    for ((title, _, content_hash), (duration_s, fps)) in fresh.into_iter().zip(prints) {
        let id = db.next_song_id();
        summary.added.push((id, title.clone(), fps.len()));
        db.add_song(SongMeta { id, title, duration_s, content_hash }, fps)?;
    }
    if !summary.added.is_empty() || !db_path.exists() {
        dbfile::save(db_path, &db)?;
    }
    Ok(summary)
}

pub fn query(db_path: &Path, dict_path: &Path, wav: &Path, cfg: &Config) -> Result<(Vec<Detection>, FingerprintDb)> {
    let db = dbfile::load(db_path)?;
    let dict = dictfile::load(dict_path)?;
    let sig = load_wav(wav)?;
    let q = fingerprint_signal(&sig, &dict, cfg)?;
    let dets = detect(&db, &q, sig.duration_s(), &cfg.detect())?;
    Ok((dets, db))
}

/// Synthetic scores of the corpus songs, keyed by their database ids
/// (matched on file name), or by manifest position when `db` is `None`.
pub fn corpus_songs(corpus: &Path, db: Option<&FingerprintDb>, cfg: &Config) -> Result<Vec<(SongId, SyntheticScore)>> {
    let manifest = read_manifest(corpus)?;
    manifest
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let id = match db {
                None => SongId(i as u32),
                Some(db) => db
                    .songs()
                    .iter()
                    .find(|s| s.title == e.file)
                    .map(|s| s.id)
                    .ok_or_else(|| Error::Data(format!("corpus song {} is not in the database", e.file)))?,
            };
            Ok((id, e.score(cfg.chroma())?))
        })
        .collect()
}

pub fn run_evaluate(
    db_path: &Path,
    dict_path: &Path,
    corpus: &Path,
    attacks: &[Attack],
    settings: &EvalSettings,
    cfg: &Config,
) -> Result<Vec<LevelResult>> {
    let db = dbfile::load(db_path)?;
    let dict = dictfile::load(dict_path)?;
    let songs = corpus_songs(corpus, Some(&db), cfg)?;
    evaluate(&db, &dict, cfg, &songs, attacks, settings)
}

/// Attacked mash-up of corpus songs written to `out`, with the ground-truth
/// table next to it (`<out>.truth.tsv`).
pub fn synth_mashup(
    corpus: &Path,
    db_path: Option<&Path>,
    attack: Attack,
    settings: &EvalSettings,
    out: &Path,
    format: SampleFormat,
    cfg: &Config,
) -> Result<Vec<SnippetTruth>> {
    let db = db_path.map(dbfile::load).transpose()?;
    let songs = corpus_songs(corpus, db.as_ref(), cfg)?;
    let lengths: Vec<f64> = songs.iter().map(|(_, s)| s.length_s).collect();
    let plan = plan_mashup(&lengths, settings.snippets, settings.min_len_s, settings.max_len_s, settings.seed)?;
    let (sig, truth) = attacked_mashup(&songs, &plan, attack, settings.seed.wrapping_add(1))?;
    write_wav(out, &sig, format)?;
    crate::write_atomic(&truth_path(out), report::truth_records(&truth).as_bytes())?;
    Ok(truth)
}

pub fn truth_path(wav: &Path) -> std::path::PathBuf {
    let mut s = wav.as_os_str().to_owned();
    s.push(".truth.tsv");
    s.into()
}

/// The time-chroma image as CSV, one row per chroma bin, one column per
/// frame.
pub fn dump_chroma(sig: &AudioSignal, cfg: &Config) -> Result<String> {
    let img = time_chroma(sig, cfg)?;
    let mut out = String::new();
    for b in 0..img.n_bins() {
        for t in 0..img.n_frames() {
            if t > 0 {
                out.push(',');
            }
            write!(out, "{}", img.get(b, t)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
