//! Tab-separated text records: detections and mash-up ground truth.

use std::fmt::Write as _;

use tchroma_core::attacks::SnippetTruth;
use tchroma_core::{Detection, FingerprintDb, SongId};

use crate::error::{Error, Result};

pub const DETECTION_HEADER: &str = "#song_id\tquery_start\tquery_end\tdb_start\tdb_end\ta\tb\tdp\tsupport";
pub const TRUTH_HEADER: &str = "#song_id\tquery_start\tquery_end\tdb_start\tdb_end\ta\tb\tdp";

/// One line per detection, `dp` in `[0, B)`.
pub fn detection_records(dets: &[Detection]) -> String {
    let mut out = String::from(DETECTION_HEADER);
    out.push('\n');
    for d in dets {
        let (s, e) = d.db_interval();
        writeln!(
            out,
            "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.4}\t{:.3}\t{}\t{}",
            d.song, d.query_start, d.query_end, s, e, d.a, d.b, d.dp, d.support
        )
        .unwrap();
    }
    out
}

/// Human-readable lines, with song titles and the signed pitch shift.
pub fn detection_summary(dets: &[Detection], db: &FingerprintDb) -> String {
    if dets.is_empty() {
        return "no copied material found\n".into();
    }
    let mut out = String::new();
    for d in dets {
        let title = db.song(d.song).map_or("?", |s| s.title.as_str());
        let (s, e) = d.db_interval();
        writeln!(
            out,
            "{:7.2}-{:7.2} s  song {} ({title}) {:.2}-{:.2} s  tempo x{:.3}  pitch {:+} steps  ({} features)",
            d.query_start,
            d.query_end,
            d.song,
            s,
            e,
            d.a,
            d.dp_signed(),
            d.support
        )
        .unwrap();
    }
    out
}

/// Ground truth, `dp` signed.
pub fn truth_records(truth: &[SnippetTruth]) -> String {
    let mut out = String::from(TRUTH_HEADER);
    out.push('\n');
    for t in truth {
        // full precision so the table reads back exactly
        writeln!(
            out,
            "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{}",
            t.song, t.query_start, t.query_end, t.db_start, t.db_end, t.a, t.b, t.dp
        )
        .unwrap();
    }
    out
}

pub fn parse_truth(text: &str) -> Result<Vec<SnippetTruth>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("ground truth line {}: `{line}`", no + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(bad());
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        out.push(SnippetTruth {
            song: SongId(f[0].parse().map_err(|_| bad())?),
            query_start: num(1)?,
            query_end: num(2)?,
            db_start: num(3)?,
            db_end: num(4)?,
            a: num(5)?,
            b: num(6)?,
            dp: f[7].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_round_trips() {
        let t = vec![SnippetTruth {
            song: SongId(4),
            query_start: 1.0 / 3.0,
            query_end: 12.5,
            db_start: 30.0,
            db_end: 42.1,
            a: 1.0 / 1.2,
            b: -0.1,
            dp: -12,
        }];
        assert_eq!(parse_truth(&truth_records(&t)).unwrap(), t);
        assert!(parse_truth("1\t2\t3").is_err());
    }

    #[test]
    fn detection_fields_are_stable() {
        let d = Detection {
            song: SongId(3),
            query_start: 1.0,
            query_end: 11.0,
            a: 1.2,
            b: 5.0,
            dp: 276,
            bins: 288,
            support: 9,
        };
        let text = detection_records(&[d]);
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "3\t1.000\t11.000\t-3.333\t5.000\t1.2000\t5.000\t276\t9");
        assert_eq!(text.lines().next().unwrap().split('\t').count(), 9);
    }
}
