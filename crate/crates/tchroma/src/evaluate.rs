//! Attacked mash-up evaluation: build a query from snippets of database
//! songs, attack it, detect, and score each snippet against ground truth.

use std::fmt::Write as _;

use rayon::prelude::*;
use tchroma_core::attacks::{attacked_mashup, plan_mashup, Attack, SnippetTruth, SyntheticScore};
use tchroma_core::identify::detect;
use tchroma_core::pipeline::fingerprint_signal;
use tchroma_core::{Config, Detection, FingerprintDb, PatternDictionary, SongId};

use crate::error::{Error, Result};

/// `|a - a_true|` below this counts as a correct tempo estimate.
pub const TEMPO_TOLERANCE: f64 = 0.01;
/// Interval overlap needed for a snippet to count as localized.
pub const MIN_IOU: f64 = 0.7;

/// Parse `kind=v1,v2;kind=...` with kinds `none`, `tempo`, `pitch`,
/// `speed`, `noise` (SNR in dB).
pub fn parse_attacks(spec: &str) -> Result<Vec<Attack>> {
    let mut out = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || Error::Usage(format!("bad attack spec `{part}`"));
        let (kind, values) = part.split_once('=').unwrap_or((part, ""));
        let vals = || values.split(',').map(str::trim).filter(|s| !s.is_empty());
        match kind.trim() {
            "none" => out.push(Attack::None),
            "pitch" => {
                for v in vals() {
                    out.push(Attack::Pitch(v.parse().map_err(|_| bad())?));
                }
            }
            k @ ("tempo" | "speed" | "noise") => {
                for v in vals() {
                    let x: f64 = v.parse().map_err(|_| bad())?;
                    out.push(match k {
                        "tempo" => Attack::Tempo(x),
                        "speed" => Attack::Speed(x),
                        _ => Attack::Noise(x),
                    });
                }
            }
            _ => return Err(bad()),
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("attack spec lists no levels".into()));
    }
    Ok(out)
}

fn attack_label(a: &Attack) -> (&'static str, String) {
    match *a {
        Attack::None => ("none", "0".into()),
        Attack::Tempo(k) => ("tempo", format!("{k}")),
        Attack::Pitch(d) => ("pitch", format!("{d}")),
        Attack::Speed(k) => ("speed", format!("{k}")),
        Attack::Noise(snr) => ("noise", format!("{snr}")),
    }
}

pub fn iou(d: &Detection, t: &SnippetTruth) -> f64 {
    let inter = (d.query_end.min(t.query_end) - d.query_start.max(t.query_start)).max(0.0);
    let union = d.query_end.max(t.query_end) - d.query_start.min(t.query_start);
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Outcome for one snippet. The detection scored is the one with the
/// snippet's song that overlaps it most.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnippetOutcome {
    pub song_ok: bool,
    pub tempo_ok: bool,
    pub pitch_ok: bool,
    pub iou: f64,
}

impl SnippetOutcome {
    /// Song, tempo and pitch right and the interval found.
    pub fn all_ok(&self) -> bool {
        self.song_ok && self.tempo_ok && self.pitch_ok && self.iou >= MIN_IOU
    }
}

pub fn score_snippet(dets: &[Detection], t: &SnippetTruth) -> SnippetOutcome {
    let best =
        dets.iter().filter(|d| d.song == t.song && iou(d, t) > 0.0).max_by(|x, y| iou(x, t).total_cmp(&iou(y, t)));
    match best {
        None => SnippetOutcome { song_ok: false, tempo_ok: false, pitch_ok: false, iou: 0.0 },
        Some(d) => SnippetOutcome {
            song_ok: true,
            tempo_ok: (d.a - t.a).abs() < TEMPO_TOLERANCE,
            pitch_ok: d.dp_signed() == t.dp,
            iou: iou(d, t),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub snippets: usize,
    pub min_len_s: f64,
    pub max_len_s: f64,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { snippets: 10, min_len_s: 10.0, max_len_s: 20.0, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub attack: Attack,
    pub truth: Vec<SnippetTruth>,
    pub detections: Vec<Detection>,
    pub outcomes: Vec<SnippetOutcome>,
}

impl LevelResult {
    fn rate(&self, f: impl Fn(&SnippetOutcome) -> bool) -> f64 {
        self.outcomes.iter().filter(|o| f(o)).count() as f64 / self.outcomes.len() as f64
    }

    pub fn song_rate(&self) -> f64 {
        self.rate(|o| o.song_ok)
    }

    pub fn tempo_rate(&self) -> f64 {
        self.rate(|o| o.tempo_ok)
    }

    pub fn pitch_rate(&self) -> f64 {
        self.rate(|o| o.pitch_ok)
    }

    pub fn all_ok_rate(&self) -> f64 {
        self.rate(SnippetOutcome::all_ok)
    }

    pub fn mean_iou(&self) -> f64 {
        self.outcomes.iter().map(|o| o.iou).sum::<f64>() / self.outcomes.len() as f64
    }
}

/// Run one mash-up per attack level. Every level uses the same snippet
/// plan, so rows differ only by the attack.
pub fn evaluate(
    db: &FingerprintDb,
    dict: &PatternDictionary,
    cfg: &Config,
    songs: &[(SongId, SyntheticScore)],
    attacks: &[Attack],
    settings: &EvalSettings,
) -> Result<Vec<LevelResult>> {
    let lengths: Vec<f64> = songs.iter().map(|(_, s)| s.length_s).collect();
    let plan = plan_mashup(&lengths, settings.snippets, settings.min_len_s, settings.max_len_s, settings.seed)?;
    let params = cfg.detect();
    attacks
        .par_iter()
        .map(|&attack| {
            let (sig, truth) = attacked_mashup(songs, &plan, attack, settings.seed.wrapping_add(1))?;
            let q = fingerprint_signal(&sig, dict, cfg)?;
            let detections = detect(db, &q, sig.duration_s(), &params)?;
            let outcomes = truth.iter().map(|t| score_snippet(&detections, t)).collect();
            Ok(LevelResult { attack, truth, detections, outcomes })
        })
        .collect()
}

pub const CSV_HEADER: &str = "attack,level,snippets,song_id_rate,tempo_rate,pitch_rate,mean_iou,all_correct_rate";

pub fn metrics_csv(rows: &[LevelResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (kind, level) = attack_label(&r.attack);
        writeln!(
            out,
            "{kind},{level},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.outcomes.len(),
            r.song_rate(),
            r.tempo_rate(),
            r.pitch_rate(),
            r.mean_iou(),
            r.all_ok_rate()
        )
        .unwrap();
    }
    out
}
