//! Pitch and tempo behaviour of the image and the features, checked on
//! rendered synthetic songs.

use tchroma_core::attacks::{attack_pitch_shift, attack_speed, attack_tempo, generate_score, SyntheticScore};
use tchroma_core::features::{build_dictionary, detect_features, fingerprint_features};
use tchroma_core::pipeline::time_chroma;
use tchroma_core::{ChromaParams, Config, TimeChromaImage};

fn cfg() -> Config {
    Config::default()
}

fn image(sig: &tchroma_core::AudioSignal) -> TimeChromaImage {
    time_chroma(sig, &cfg()).unwrap()
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    (aa > 0.0 && bb > 0.0).then(|| ab / (aa * bb).sqrt())
}

/// Mean cosine over columns where both images carry energy.
fn mean_column_cosine(a: &TimeChromaImage, b: &TimeChromaImage) -> f64 {
    let n = a.n_frames().min(b.n_frames());
    let floor = 1e-6 * a.max_value().max(b.max_value());
    let cs: Vec<f64> = (0..n)
        .filter(|&t| a.column(t).iter().sum::<f64>() > floor && b.column(t).iter().sum::<f64>() > floor)
        .filter_map(|t| cosine(a.column(t), b.column(t)))
        .collect();
    assert!(!cs.is_empty());
    cs.iter().sum::<f64>() / cs.len() as f64
}

/// Column of `img` at time `t` (seconds), linear in time.
fn column_at(img: &TimeChromaImage, t: f64) -> Option<Vec<f64>> {
    let x = (t - img.first_center_s()) / img.frame_hop_s();
    if x < 0.0 || x > (img.n_frames() - 1) as f64 {
        return None;
    }
    let i = x.floor() as usize;
    let f = x - i as f64;
    let j = (i + 1).min(img.n_frames() - 1);
    Some(img.column(i).iter().zip(img.column(j)).map(|(p, q)| p * (1.0 - f) + q * f).collect())
}

fn score(seed: u64) -> SyntheticScore {
    generate_score(seed, 20.0, ChromaParams::default()).unwrap()
}

#[test]
fn pitch_shift_is_a_circular_shift_of_the_image() {
    let s = score(21);
    let orig = image(&s.render());
    for dp in [-12i64, 12] {
        let shifted = image(&attack_pitch_shift(&s, dp).unwrap());
        let c = mean_column_cosine(&shifted, &orig.circular_shift(dp));
        assert!(c >= 0.95, "dp {dp}: {c}");
    }
}

#[test]
fn pitch_shift_round_trip_restores_the_image() {
    let s = score(22);
    let orig = image(&s.render());
    let back = s.pitch_shifted(12).unwrap().pitch_shifted(-12).unwrap();
    assert!(mean_column_cosine(&image(&back.render()), &orig) >= 0.99);
}

#[test]
fn tempo_round_trip_restores_the_image() {
    let s = score(23);
    let orig = image(&s.render());
    let back = s.tempo_scaled(1.25).unwrap().tempo_scaled(0.8).unwrap();
    assert!(mean_column_cosine(&image(&back.render()), &orig) >= 0.99);
}

#[test]
fn tempo_change_stretches_the_image_in_time() {
    let s = score(24);
    let orig = image(&s.render());
    for a in [0.8, 1.25] {
        let fast = image(&attack_tempo(&s, a).unwrap());
        let mut cs = Vec::new();
        for t in 0..fast.n_frames() {
            let tq = fast.time_of(t);
            if let Some(col) = column_at(&orig, tq * a) {
                if let Some(c) = cosine(fast.column(t), &col) {
                    cs.push(c);
                }
            }
        }
        let mean = cs.iter().sum::<f64>() / cs.len() as f64;
        assert!(mean >= 0.9, "a {a}: {mean}");
    }
}

#[test]
fn speed_is_tempo_plus_pitch() {
    let s = score(25);
    let speed = 1.2;
    let steps = (72.0 * f64::log2(speed)).round() as i64;
    assert_eq!(steps, 19);
    let by_speed = image(&attack_speed(&s.render(), speed).unwrap());
    let by_parts = image(&s.tempo_scaled(speed).unwrap().pitch_shifted(steps).unwrap().render());
    let c = mean_column_cosine(&by_speed, &by_parts);
    assert!(c >= 0.95, "{c}");
}

#[test]
fn speed_change_moves_chroma_by_log2_of_factor() {
    let s = score(26);
    let orig = image(&s.render());
    let fast = image(&attack_speed(&s.render(), 1.2).unwrap());
    // best circular shift between time-aligned columns
    let b = orig.n_bins() as i64;
    let mut best = (f64::MIN, 0);
    for d in 0..b {
        let mut total = 0.0;
        for t in (0..fast.n_frames()).step_by(4) {
            if let Some(col) = column_at(&orig, fast.time_of(t) * 1.2) {
                let q = fast.column(t);
                total += (0..b as usize).map(|k| col[k] * q[((k as i64 + d) % b) as usize]).sum::<f64>();
            }
        }
        if total > best.0 {
            best = (total, d);
        }
    }
    assert_eq!(best.1, 19);
}

#[test]
fn rendered_pitches_dominate_the_image() {
    let p = ChromaParams::default();
    let s = score(27);
    let img = image(&s.render());
    let b = p.bins() as i64;
    let (mut voiced, mut hits) = (0, 0);
    for t in 0..img.n_frames() {
        let time = img.time_of(t);
        // notes at least half way up their envelope
        let active: Vec<_> = s
            .notes
            .iter()
            .filter(|n| {
                let x = (time - n.onset_s) / n.duration_s;
                (0.25..=0.75).contains(&x)
            })
            .collect();
        if active.is_empty() {
            continue;
        }
        voiced += 1;
        let col = img.column(t);
        let arg = (0..col.len()).max_by(|&i, &j| col[i].total_cmp(&col[j])).unwrap() as i64;
        let hit = active.iter().any(|n| {
            (1..=n.harmonics).any(|h| {
                let centre = n.pitch as f64 + 72.0 * f64::from(h).log2();
                let d = (arg as f64 - centre).rem_euclid(b as f64);
                d.min(b as f64 - d) <= 3.0
            })
        });
        hits += usize::from(hit);
    }
    let rate = hits as f64 / voiced as f64;
    assert!(rate >= 0.9, "{rate}");
}

#[test]
fn features_follow_a_circular_shift_exactly() {
    let c = cfg();
    let imgs: Vec<_> = (30..34).map(|seed| image(&score(seed).render())).collect();
    let dict = build_dictionary(&imgs, &c.dictionary()).unwrap().dictionary;
    let img = &imgs[0];
    let base = detect_features(img, &dict, &c.detect_features()).unwrap();
    let base_fp = fingerprint_features(img, &base, c.q, c.r);
    assert!(base.len() > 50);
    for dp in [-12i64, 7, 144] {
        let shifted = img.circular_shift(dp);
        let mut pts = detect_features(&shifted, &dict, &c.detect_features()).unwrap();
        // same points, listed in (frame, unshifted bin) order
        pts.sort_by_key(|q| (q.frame, (q.bin as i64 - dp).rem_euclid(288)));
        assert_eq!(pts.len(), base.len());
        for (p, q) in base.iter().zip(&pts) {
            assert_eq!(q.bin as i64, (p.bin as i64 + dp).rem_euclid(288));
            assert_eq!((q.frame, q.scale_s, q.ptype), (p.frame, p.scale_s, p.ptype));
        }
        let fps = fingerprint_features(&shifted, &pts, c.q, c.r);
        assert_eq!(fps.len(), base_fp.len());
        for (x, y) in base_fp.iter().zip(&fps) {
            assert!(x.desc.iter().zip(&y.desc).all(|(u, v)| (u - v).abs() < 1e-9));
        }
    }
}
