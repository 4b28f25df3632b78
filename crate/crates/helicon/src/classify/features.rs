//! The 30-feature description of one track, relative to its song.
//!
//! All statistics are note-count weighted unless stated; stddevs are
//! population stddevs. Drum-channel notes never contribute, neither as
//! track content nor as song context.

use serde::Serialize;

use crate::error::ClassifyError;
use crate::midi::Note;

pub const FEATURE_COUNT: usize = 30;

/// Column names, index-aligned with `FeatureVector::values`.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "note_count",
    "notes_per_beat",
    "pitch_mean",
    "pitch_std",
    "pitch_range",
    "pitch_mean_norm",
    "pitch_class_count",
    "pitch_class_entropy",
    "interval_mean_abs",
    "interval_std",
    "stepwise_fraction",
    "repeat_fraction",
    "contour_changes",
    "duration_mean",
    "duration_std",
    "long_note_fraction",
    "velocity_mean",
    "velocity_std",
    "polyphony_rate",
    "poly2_fraction",
    "poly3_fraction",
    "silence_fraction",
    "span_ratio",
    "highest_share",
    "lowest_share",
    "pitch_mean_offset",
    "onset_density_std",
    "on_beat_fraction",
    "bigram_repetition",
    "low_pitch_fraction",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

fn mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn pstd(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = mean(xs.clone());
    let var = mean(xs.map(|x| (x - m) * (x - m)));
    var.max(0.0).sqrt()
}

fn span(notes: &[Note]) -> (f64, f64) {
    let lo = notes.iter().map(|n| n.onset_beats).fold(f64::INFINITY, f64::min);
    let hi = notes.iter().map(|n| n.end_beats()).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Sounding time at polyphony levels >= 1, >= 2, >= 3.
fn polyphony_coverage(notes: &[Note]) -> (f64, f64, f64) {
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        events.push((n.onset_beats, 1));
        events.push((n.end_beats(), -1));
    }
    // Ends sort before starts at equal times, so touching notes do not
    // count as simultaneous.
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut c1, mut c2, mut c3) = (0.0, 0.0, 0.0);
    let mut level = 0i32;
    let mut prev = events.first().map(|e| e.0).unwrap_or(0.0);
    for (t, d) in events {
        let len = t - prev;
        if len > 0.0 {
            if level >= 1 {
                c1 += len;
            }
            if level >= 2 {
                c2 += len;
            }
            if level >= 3 {
                c3 += len;
            }
        }
        prev = t;
        level += d;
    }
    (c1, c2, c3)
}

/// Time during which `track` supplies the extreme sounding pitch of the
/// song; ties count. Returns (highest_time, lowest_time).
fn extreme_pitch_time(track: &[Note], song: &[Note]) -> (f64, f64) {
    let mut points: Vec<f64> = song.iter().flat_map(|n| [n.onset_beats, n.end_beats()]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let (mut high, mut low) = (0.0, 0.0);
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let active = |n: &&Note| n.onset_beats <= a && n.end_beats() >= b;
        let song_max = song.iter().filter(active).map(|n| n.pitch).max();
        let song_min = song.iter().filter(active).map(|n| n.pitch).min();
        let track_max = track.iter().filter(active).map(|n| n.pitch).max();
        let track_min = track.iter().filter(active).map(|n| n.pitch).min();
        if let (Some(sm), Some(tm)) = (song_max, track_max) {
            if tm == sm {
                high += len;
            }
        }
        if let (Some(sm), Some(tm)) = (song_min, track_min) {
            if tm == sm {
                low += len;
            }
        }
    }
    (high, low)
}

/// Computes the 30 features of a track given the whole song as context.
/// `song_notes` must include the track's own notes.
pub fn extract_features(
    track_notes: &[Note],
    song_notes: &[Note],
) -> Result<FeatureVector, ClassifyError> {
    let track: Vec<Note> = track_notes.iter().filter(|n| !n.is_drum()).copied().collect();
    if track.is_empty() {
        return Err(ClassifyError::EmptyTrack);
    }
    let song: Vec<Note> = song_notes.iter().filter(|n| !n.is_drum()).copied().collect();

    let count = track.len() as f64;
    let (t_lo, t_hi) = span(&track);
    let t_span = t_hi - t_lo;
    let (s_lo, s_hi) = span(&song);
    let s_span = (s_hi - s_lo).max(0.0);

    let pitches = || track.iter().map(|n| f64::from(n.pitch));
    let pitch_mean = mean(pitches());
    let p_min = track.iter().map(|n| n.pitch).min().unwrap();
    let p_max = track.iter().map(|n| n.pitch).max().unwrap();
    let song_min = song.iter().map(|n| n.pitch).min().unwrap_or(p_min);
    let song_max = song.iter().map(|n| n.pitch).max().unwrap_or(p_max);
    let pitch_mean_norm = if song_max > song_min {
        (pitch_mean - f64::from(song_min)) / f64::from(song_max - song_min)
    } else {
        0.5
    };

    let mut pc_counts = [0usize; 12];
    for n in &track {
        pc_counts[n.pitch_class() as usize] += 1;
    }
    let pc_distinct = pc_counts.iter().filter(|c| **c > 0).count() as f64;
    let entropy: f64 = pc_counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / count;
            -p * p.log2()
        })
        .sum();

    // Melodic order: by onset, then pitch; intervals between neighbors.
    let mut ordered: Vec<&Note> = track.iter().collect();
    ordered.sort_by(|x, y| x.onset_beats.total_cmp(&y.onset_beats).then(x.pitch.cmp(&y.pitch)));
    let signed: Vec<f64> = ordered
        .windows(2)
        .map(|p| f64::from(p[1].pitch) - f64::from(p[0].pitch))
        .collect();
    let n_iv = signed.len();
    let abs_mean = mean(signed.iter().map(|d| d.abs()));
    let abs_std = pstd(signed.iter().map(|d| d.abs()));
    let stepwise = if n_iv == 0 {
        0.0
    } else {
        signed.iter().filter(|d| d.abs() <= 2.0).count() as f64 / n_iv as f64
    };
    let repeats = if n_iv == 0 {
        0.0
    } else {
        signed.iter().filter(|d| **d == 0.0).count() as f64 / n_iv as f64
    };
    let directions: Vec<f64> = signed.iter().filter(|d| **d != 0.0).map(|d| d.signum()).collect();
    let contour = if n_iv == 0 {
        0.0
    } else {
        directions.windows(2).filter(|p| p[0] != p[1]).count() as f64 / n_iv as f64
    };

    let durations = || track.iter().map(|n| n.duration_beats);
    let long_fraction = track.iter().filter(|n| n.duration_beats >= 1.0).count() as f64 / count;
    let vel_mean = mean(track.iter().map(|n| f64::from(n.velocity))) / 127.0;
    let vel_std = pstd(track.iter().map(|n| f64::from(n.velocity))) / 127.0;

    let (covered, poly2, poly3) = polyphony_coverage(&track);
    let note_time: f64 = durations().sum();
    let polyphony_rate = if covered > 0.0 { note_time / covered } else { 0.0 };
    let poly2_fraction = if covered > 0.0 { poly2 / covered } else { 0.0 };
    let poly3_fraction = if covered > 0.0 { poly3 / covered } else { 0.0 };
    let silence = if t_span > 0.0 { ((t_span - covered) / t_span).max(0.0) } else { 0.0 };
    let span_ratio = if s_span > 0.0 { (t_span / s_span).min(1.0) } else { 1.0 };

    let (high_time, low_time) = extreme_pitch_time(&track, &song);
    let highest_share = if s_span > 0.0 { high_time / s_span } else { 1.0 };
    let lowest_share = if s_span > 0.0 { low_time / s_span } else { 1.0 };
    let song_pitch_mean = mean(song.iter().map(|n| f64::from(n.pitch)));

    // Onset density over fixed 4-beat frames anchored at song start;
    // the classifier runs before any time-signature analysis.
    let n_bars = ((s_span / 4.0).ceil() as usize).max(1);
    let mut per_bar = vec![0.0f64; n_bars];
    for n in &track {
        let idx = (((n.onset_beats - s_lo) / 4.0).floor() as usize).min(n_bars - 1);
        per_bar[idx] += 1.0;
    }
    let density_std = pstd(per_bar.iter().copied());

    let on_beat = track
        .iter()
        .filter(|n| (n.onset_beats - n.onset_beats.round()).abs() < 1e-9)
        .count() as f64
        / count;

    let bigrams: Vec<(u8, u8)> = ordered.windows(2).map(|p| (p[0].pitch, p[1].pitch)).collect();
    let bigram_rep = if bigrams.is_empty() {
        0.0
    } else {
        let mut uniq = bigrams.clone();
        uniq.sort_unstable();
        uniq.dedup();
        1.0 - uniq.len() as f64 / bigrams.len() as f64
    };

    let low_fraction = track.iter().filter(|n| n.pitch < 48).count() as f64 / count;

    let values = [
        count,
        if t_span > 0.0 { count / t_span } else { count },
        pitch_mean,
        pstd(pitches()),
        f64::from(p_max - p_min),
        pitch_mean_norm,
        pc_distinct,
        entropy,
        abs_mean,
        abs_std,
        stepwise,
        repeats,
        contour,
        mean(durations()),
        pstd(durations()),
        long_fraction,
        vel_mean,
        vel_std,
        polyphony_rate,
        poly2_fraction,
        poly3_fraction,
        silence,
        span_ratio,
        highest_share,
        lowest_share,
        pitch_mean - song_pitch_mean,
        density_std,
        on_beat,
        bigram_rep,
        low_fraction,
    ];
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(FeatureVector { values })
}
