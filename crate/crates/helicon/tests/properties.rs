//! Randomized invariants of the geometry, the MIDI round trip, and the
//! tension pipeline.

use proptest::prelude::*;

use helicon::midi::{
    build_note_list, encode_vlq, parse_smf, read_vlq, write_smf, EventKind, MidiFile, Note,
    TimeSigMap, Track, TrackEvent,
};
use helicon::spiral::{
    center_of_effect, distance, key_center, pitch_position, KeyId, Mode, SpiralParams,
};
use helicon::tension::{compute_tension, compute_tension_seq};
use helicon::tonal::{analyze_key, spell_notes, SpellingClass};

fn params() -> SpiralParams {
    SpiralParams::default()
}

/// Note spec on an exact tick grid: (onset_ticks, dur_ticks, pitch,
/// velocity, channel). Durations start at one tick so nothing collapses.
fn note_spec() -> impl Strategy<Value = (u32, u32, u8, u8, u8)> {
    (0u32..2048, 1u32..512, 24u8..=96, 1u8..=127, 0u8..=15)
}

/// Builds a one-track file whose events are already in canonical order
/// (ascending tick, offs before ons at equal ticks).
fn file_from_specs(specs: &[(u32, u32, u8, u8, u8)], ppq: u16) -> MidiFile {
    let mut events: Vec<(u64, bool, u8, u8, u8)> = Vec::new();
    for &(onset, dur, pitch, velocity, channel) in specs {
        events.push((u64::from(onset), true, pitch, velocity, channel));
        events.push((u64::from(onset) + u64::from(dur), false, pitch, 0, channel));
    }
    events.sort_by_key(|&(tick, is_on, pitch, _, channel)| (tick, is_on, channel, pitch));
    let mut track_events: Vec<TrackEvent> = events
        .into_iter()
        .map(|(tick, is_on, pitch, velocity, channel)| TrackEvent {
            tick,
            kind: if is_on {
                EventKind::NoteOn { channel, pitch, velocity }
            } else {
                EventKind::NoteOff { channel, pitch, velocity: 0 }
            },
        })
        .collect();
    let last = track_events.last().map(|e| e.tick).unwrap_or(0);
    track_events.push(TrackEvent { tick: last, kind: EventKind::EndOfTrack });
    MidiFile { format: 1, ppq, tracks: vec![Track { name: None, events: track_events }] }
}

fn notes_from_specs(specs: &[(u32, u32, u8, u8, u8)], ppq: u16) -> Vec<Note> {
    let (notes, _, _) = build_note_list(&file_from_specs(specs, ppq));
    notes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fifth_step_distance_is_constant(k in -60i32..60) {
        let p = params();
        let expected = (2.0 * p.r * p.r + p.h * p.h).sqrt();
        let d = distance(pitch_position(k, &p), pitch_position(k + 1, &p));
        prop_assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn fifth_step_is_a_quarter_turn_up(k in -60i32..60) {
        let p = params();
        let a = pitch_position(k, &p);
        let b = pitch_position(k + 1, &p);
        prop_assert!((b.x - a.y).abs() < 1e-12);
        prop_assert!((b.y + a.x).abs() < 1e-12);
        prop_assert!((b.z - (a.z + p.h)).abs() < 1e-12);
    }

    #[test]
    fn center_of_effect_ignores_weight_scale(
        ks in proptest::collection::vec((-12i32..=12, 0.05f64..4.0), 1..10),
        scale in 0.01f64..100.0,
    ) {
        let p = params();
        let pts: Vec<_> = ks.iter().map(|&(k, w)| (pitch_position(k, &p), w)).collect();
        let scaled: Vec<_> = pts.iter().map(|&(pt, w)| (pt, w * scale)).collect();
        let a = center_of_effect(&pts).unwrap();
        let b = center_of_effect(&scaled).unwrap();
        prop_assert!(distance(a, b) < 1e-9);
    }

    #[test]
    fn vlq_round_trips(value in 0u32..=0x0FFF_FFFF) {
        let bytes = encode_vlq(value);
        prop_assert!(bytes.len() <= 4);
        let (decoded, next) = read_vlq(&bytes, 0).unwrap();
        prop_assert_eq!(decoded, value);
        prop_assert_eq!(next, bytes.len());
    }

    #[test]
    fn smf_write_parse_preserves_note_lists(
        specs in proptest::collection::vec(note_spec(), 0..40),
        ppq in prop_oneof![Just(96u16), Just(120), Just(480), Just(960)],
    ) {
        let file = file_from_specs(&specs, ppq);
        let reparsed = parse_smf(&write_smf(&file)).unwrap();
        let (a, _, _) = build_note_list(&file);
        let (b, _, _) = build_note_list(&reparsed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tension_measures_are_finite_and_nonnegative(
        specs in proptest::collection::vec(note_spec(), 1..30),
    ) {
        let notes = notes_from_specs(&specs, 480);
        let spelled = spell_notes(&notes, SpellingClass::Sharps);
        let key = KeyId { fifth_index: 0, mode: Mode::Major };
        let series = compute_tension(&spelled, key, 2.0, &TimeSigMap::default(), &params());
        for w in &series.windows {
            prop_assert!(w.diameter.is_finite() && w.diameter >= 0.0);
            prop_assert!(w.momentum.is_finite() && w.momentum >= 0.0);
            prop_assert!(w.strain.is_finite() && w.strain >= 0.0);
        }
    }

    #[test]
    fn octave_transposition_preserves_key_and_tension(
        specs in proptest::collection::vec(note_spec(), 1..30),
        up in proptest::bool::ANY,
    ) {
        let notes = notes_from_specs(&specs, 480);
        prop_assume!(notes.iter().any(|n| !n.is_drum()));
        let shifted: Vec<Note> = notes
            .iter()
            .map(|n| Note {
                pitch: if up { n.pitch + 12 } else { n.pitch - 12 },
                ..*n
            })
            .collect();
        let sigs = TimeSigMap::default();
        let p = params();
        let (sp_a, key_a) = analyze_key(&notes, &p).unwrap();
        let (sp_b, key_b) = analyze_key(&shifted, &p).unwrap();
        prop_assert_eq!(key_a, key_b);
        let ta = compute_tension(&sp_a, key_a.key, 2.0, &sigs, &p);
        let tb = compute_tension(&sp_b, key_b.key, 2.0, &sigs, &p);
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn parallel_and_sequential_tension_agree(
        specs in proptest::collection::vec(note_spec(), 1..30),
    ) {
        let notes = notes_from_specs(&specs, 480);
        let spelled = spell_notes(&notes, SpellingClass::Sharps);
        let key = KeyId { fifth_index: 0, mode: Mode::Major };
        let sigs = TimeSigMap::default();
        let par = compute_tension(&spelled, key, 2.0, &sigs, &params());
        let seq = compute_tension_seq(&spelled, key, 2.0, &sigs, &params());
        prop_assert_eq!(par, seq);
    }

    #[test]
    fn window_count_is_ceiling_of_span(
        specs in proptest::collection::vec(note_spec(), 1..20),
        window_quarters in 1u32..16,
    ) {
        let notes = notes_from_specs(&specs, 480);
        let w = f64::from(window_quarters) * 0.25;
        let spelled = spell_notes(&notes, SpellingClass::Sharps);
        let key = KeyId { fifth_index: 0, mode: Mode::Major };
        let series = compute_tension(&spelled, key, w, &TimeSigMap::default(), &params());
        // Drum notes never reach the spelling stage, so the covered span
        // is that of the spelled notes.
        let end = spelled.iter().map(|s| s.note.end_beats()).fold(0.0f64, f64::max);
        prop_assert_eq!(series.windows.len(), (end / w).ceil() as usize);
    }
}

/// Among k in [-6, 6], the pitch position nearest the C-major key center
/// must be C itself (k = 0).
#[test]
fn nearest_pitch_class_to_c_major_center_is_c() {
    let p = params();
    let center = key_center(KeyId { fifth_index: 0, mode: Mode::Major }, &p);
    let best = (-6i32..=6)
        .min_by(|&a, &b| {
            distance(pitch_position(a, &p), center)
                .total_cmp(&distance(pitch_position(b, &p), center))
        })
        .unwrap();
    assert_eq!(best, 0);
}
