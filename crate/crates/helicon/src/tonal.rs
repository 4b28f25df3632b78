//! Pitch spelling on the line of fifths and global key detection.
//!
//! Spelling is a two-class decision: pieces whose key index is one of
//! C, D, E, G, A, B spell accidentals as sharps; pieces keyed on
//! Db, Eb, F, Gb, Ab, Bb spell them as flats. Key detection scores all
//! 24 tonic/mode candidates by the distance from the piece's weighted
//! center of effect to the candidate key center.

use serde::Serialize;

use crate::error::TonalError;
use crate::midi::Note;
use crate::spiral::{
    center_of_effect, distance, key_center, pitch_position, KeyId, Mode, SpiralParams,
};

/// Accidental preference for the whole piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpellingClass {
    Sharps,
    Flats,
}

/// Pitch class to fifth index when accidentals are spelled as sharps.
/// Naturals: C=0 G=1 D=2 A=3 E=4 B=5 F=-1; accidentals C#7 D#9 F#6 G#8 A#10.
pub const SHARP_TABLE: [i32; 12] = [0, 7, 2, 9, 4, -1, 6, 1, 8, 3, 10, 5];

/// Pitch class to fifth index when accidentals are spelled as flats:
/// Db=-5 Eb=-3 Gb=-6 Ab=-4 Bb=-2.
pub const FLAT_TABLE: [i32; 12] = [0, -5, 2, -3, 4, -1, -6, 1, -4, 3, -2, 5];

/// Scale-degree frame for scoring a major-key candidate: semitone offset
/// from the tonic to the fifth index the degree takes in that key.
const MAJOR_FRAME: [i32; 12] = SHARP_TABLE;

/// Scale-degree frame for a minor-key candidate: flat-side degrees
/// (b3, b6, b7) and the subdominant sit below the tonic on the fifths line.
const MINOR_FRAME: [i32; 12] = [0, 7, 2, -3, 4, -1, 6, 1, -4, 3, -2, 5];

/// A note annotated with its line-of-fifths spelling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpelledNote {
    #[serde(flatten)]
    pub note: Note,
    pub fifth_index: i32,
}

/// Detected global key with a separation margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyEstimate {
    pub key: KeyId,
    /// Distance to the runner-up key minus distance to the winner; >= 0.
    pub confidence: f64,
}

impl KeyEstimate {
    pub fn tonic_name(&self) -> String {
        fifth_name(self.key.fifth_index)
    }

    pub fn full_name(&self) -> String {
        format!("{} {}", self.tonic_name(), self.key.mode.as_str())
    }
}

/// Note name of a fifth index: letters cycle F C G D A E B, with one
/// sharp added per step of +7 and one flat per step of -7.
pub fn fifth_name(fifth_index: i32) -> String {
    const LETTERS: [char; 7] = ['F', 'C', 'G', 'D', 'A', 'E', 'B'];
    let shifted = fifth_index + 1;
    let letter = LETTERS[shifted.rem_euclid(7) as usize];
    let accidentals = (f64::from(shifted) / 7.0).floor() as i32;
    let mut name = letter.to_string();
    for _ in 0..accidentals {
        name.push('#');
    }
    for _ in 0..-accidentals {
        name.push('b');
    }
    name
}

/// Pitch class of a fifth index under twelve-tone equal temperament.
pub fn fifth_pitch_class(fifth_index: i32) -> u8 {
    (fifth_index * 7).rem_euclid(12) as u8
}

fn pitched<'a>(notes: &'a [Note]) -> impl Iterator<Item = &'a Note> {
    notes.iter().filter(|n| !n.is_drum())
}

/// Most frequent pitch class among non-drum notes, by onset count.
/// Ties break toward greater total duration, then lower pitch class.
pub fn estimate_key_index(notes: &[Note]) -> Result<u8, TonalError> {
    let mut counts = [0usize; 12];
    let mut durations = [0.0f64; 12];
    let mut any = false;
    for n in pitched(notes) {
        any = true;
        counts[n.pitch_class() as usize] += 1;
        durations[n.pitch_class() as usize] += n.duration_beats;
    }
    if !any {
        return Err(TonalError::NoNotes);
    }
    let mut best = 0u8;
    for pc in 1..12u8 {
        let (c, d) = (counts[pc as usize], durations[pc as usize]);
        let (bc, bd) = (counts[best as usize], durations[best as usize]);
        if c > bc || (c == bc && d > bd) {
            best = pc;
        }
    }
    Ok(best)
}

/// Sharp class for key indices C D E G A B, flat class for the rest.
pub fn spelling_class(key_index: u8) -> SpellingClass {
    match key_index % 12 {
        0 | 2 | 4 | 7 | 9 | 11 => SpellingClass::Sharps,
        _ => SpellingClass::Flats,
    }
}

fn class_table(class: SpellingClass) -> &'static [i32; 12] {
    match class {
        SpellingClass::Sharps => &SHARP_TABLE,
        SpellingClass::Flats => &FLAT_TABLE,
    }
}

/// Assigns every non-drum note its fifth index under the given class.
pub fn spell_notes(notes: &[Note], class: SpellingClass) -> Vec<SpelledNote> {
    let table = class_table(class);
    pitched(notes)
        .map(|n| SpelledNote { note: *n, fifth_index: table[n.pitch_class() as usize] })
        .collect()
}

/// Estimates the global key from duration-weighted spelled notes.
///
/// Each of the 24 candidates re-frames the notes relative to its own tonic
/// (scale degrees keep fixed fifth offsets from the tonic), so every
/// candidate is scored in its best-case spelling; rotation along the helix
/// preserves distances, making the 24 scores commensurable. The winning
/// tonic is reported with the fifth index the active spelling class gives
/// its pitch class.
pub fn detect_key(spelled: &[SpelledNote], params: &SpiralParams) -> Result<KeyEstimate, TonalError> {
    let notes: Vec<Note> = spelled.iter().map(|s| s.note).collect();
    let key_index = estimate_key_index(&notes)?;
    detect_key_in_class(spelled, params, spelling_class(key_index))
}

/// `detect_key` with the winner named in a caller-chosen spelling class.
/// Segment re-detection passes the piece class so segment keys stay on
/// the same side of the fifths line as the piece's note spelling.
pub fn detect_key_in_class(
    spelled: &[SpelledNote],
    params: &SpiralParams,
    class: SpellingClass,
) -> Result<KeyEstimate, TonalError> {
    let naming_table = class_table(class);

    let mut scored: Vec<(f64, Mode, i32)> = Vec::with_capacity(24);
    for mode in [Mode::Major, Mode::Minor] {
        let frame = match mode {
            Mode::Major => &MAJOR_FRAME,
            Mode::Minor => &MINOR_FRAME,
        };
        let anchor = key_center(KeyId { fifth_index: 0, mode }, params);
        for tonic_pc in 0..12u8 {
            let cloud: Vec<_> = spelled
                .iter()
                .filter(|s| s.note.duration_beats > 0.0)
                .map(|s| {
                    let rel = (i32::from(s.note.pitch_class()) - i32::from(tonic_pc))
                        .rem_euclid(12) as usize;
                    (pitch_position(frame[rel], params), s.note.duration_beats)
                })
                .collect();
            let ce = center_of_effect(&cloud)?;
            scored.push((distance(ce, anchor), mode, naming_table[tonic_pc as usize]));
        }
    }
    scored.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| (a.1 == Mode::Minor).cmp(&(b.1 == Mode::Minor)))
            .then_with(|| a.2.abs().cmp(&b.2.abs()))
            .then_with(|| a.2.cmp(&b.2))
    });
    let (d1, mode, fifth) = scored[0];
    let d2 = scored[1].0;
    Ok(KeyEstimate { key: KeyId { fifth_index: fifth, mode }, confidence: d2 - d1 })
}

/// Convenience: estimate key index, spell, and detect in one pass.
pub fn analyze_key(notes: &[Note], params: &SpiralParams) -> Result<(Vec<SpelledNote>, KeyEstimate), TonalError> {
    let key_index = estimate_key_index(notes)?;
    let spelled = spell_notes(notes, spelling_class(key_index));
    let estimate = detect_key(&spelled, params)?;
    Ok((spelled, estimate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(pitch: u8, onset: f64, dur: f64) -> Note {
        Note { onset_beats: onset, duration_beats: dur, pitch, velocity: 80, track: 0, channel: 0 }
    }

    fn drum(pitch: u8) -> Note {
        Note { onset_beats: 0.0, duration_beats: 1.0, pitch, velocity: 80, track: 0, channel: 9 }
    }

    #[test]
    fn key_index_count_then_duration_then_pc() {
        assert_eq!(estimate_key_index(&[n(60, 0.0, 1.0)]).unwrap(), 0);
        assert_eq!(
            estimate_key_index(&[n(60, 0.0, 1.0), n(60, 1.0, 1.0), n(67, 2.0, 1.0)]).unwrap(),
            0
        );
        assert_eq!(estimate_key_index(&[n(60, 0.0, 1.0), n(67, 1.0, 2.0)]).unwrap(), 7);
        assert_eq!(estimate_key_index(&[n(67, 0.0, 1.0), n(60, 1.0, 1.0)]).unwrap(), 0);
        assert!(matches!(estimate_key_index(&[]), Err(TonalError::NoNotes)));
        assert!(matches!(estimate_key_index(&[drum(36)]), Err(TonalError::NoNotes)));
    }

    #[test]
    fn spelling_class_partition() {
        for pc in [0u8, 2, 4, 7, 9, 11] {
            assert_eq!(spelling_class(pc), SpellingClass::Sharps);
        }
        for pc in [1u8, 3, 5, 6, 8, 10] {
            assert_eq!(spelling_class(pc), SpellingClass::Flats);
        }
    }

    #[test]
    fn spell_notes_follows_class_tables() {
        let fs = spell_notes(&[n(66, 0.0, 1.0)], SpellingClass::Sharps);
        assert_eq!(fs[0].fifth_index, 6);
        let gb = spell_notes(&[n(66, 0.0, 1.0)], SpellingClass::Flats);
        assert_eq!(gb[0].fifth_index, -6);
        let c = spell_notes(&[n(60, 0.0, 1.0)], SpellingClass::Flats);
        assert_eq!(c[0].fifth_index, 0);
        assert!(spell_notes(&[drum(40)], SpellingClass::Sharps).is_empty());
    }

    #[test]
    fn spelled_fifth_maps_back_to_pitch_class() {
        for pc in 0..12u8 {
            for class in [SpellingClass::Sharps, SpellingClass::Flats] {
                let s = spell_notes(&[n(60 + pc, 0.0, 1.0)], class);
                assert_eq!(fifth_pitch_class(s[0].fifth_index), pc);
            }
        }
    }

    #[test]
    fn fifth_names() {
        let cases = [(0, "C"), (1, "G"), (2, "D"), (-1, "F"), (6, "F#"), (-6, "Gb"),
            (7, "C#"), (-5, "Db"), (3, "A"), (-2, "Bb"), (5, "B"), (-4, "Ab")];
        for (k, want) in cases {
            assert_eq!(fifth_name(k), want, "fifth {k}");
        }
    }

    #[test]
    fn single_c_key_estimate_is_pinned() {
        let params = SpiralParams::default();
        let (_, est) = analyze_key(&[n(60, 0.0, 1.0)], &params).unwrap();
        assert_eq!(est.key, KeyId { fifth_index: 0, mode: Mode::Major });
        assert!((est.confidence - 0.010_170_012_277_236_6).abs() < 1e-9);
    }

    #[test]
    fn repeated_c_major_triads_detect_c_major() {
        let params = SpiralParams::default();
        let mut notes = Vec::new();
        for i in 0..4 {
            let t = i as f64;
            notes.push(n(60, t, 1.0));
            notes.push(n(64, t, 1.0));
            notes.push(n(67, t, 1.0));
        }
        let (_, est) = analyze_key(&notes, &params).unwrap();
        assert_eq!(est.key, KeyId { fifth_index: 0, mode: Mode::Major });
        assert!(est.confidence > 0.0);
    }

    /// Scale of the given mode with its tonic triad doubled in duration.
    fn scale_piece(tonic_pc: u8, mode: Mode) -> Vec<Note> {
        let (degrees, triad): (&[u8], &[u8]) = match mode {
            Mode::Major => (&[0, 2, 4, 5, 7, 9, 11], &[0, 4, 7]),
            Mode::Minor => (&[0, 2, 3, 5, 7, 8, 11], &[0, 3, 7]),
        };
        degrees
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let dur = if triad.contains(d) { 2.0 } else { 1.0 };
                n(60 + (tonic_pc + d) % 12, i as f64, dur)
            })
            .collect()
    }

    #[test]
    fn a_harmonic_minor_with_doubled_triad_detects_a_minor() {
        let params = SpiralParams::default();
        let (_, est) = analyze_key(&scale_piece(9, Mode::Minor), &params).unwrap();
        assert_eq!(est.key, KeyId { fifth_index: 3, mode: Mode::Minor });
    }

    #[test]
    fn all_twelve_major_scales_detect_their_tonic() {
        let params = SpiralParams::default();
        for tonic in 0..12u8 {
            let (_, est) = analyze_key(&scale_piece(tonic, Mode::Major), &params).unwrap();
            assert_eq!(est.key.mode, Mode::Major, "tonic pc {tonic}");
            assert_eq!(fifth_pitch_class(est.key.fifth_index), tonic, "tonic pc {tonic}");
        }
    }

    #[test]
    fn all_twelve_harmonic_minor_scales_detect_their_tonic() {
        let params = SpiralParams::default();
        for tonic in 0..12u8 {
            let (_, est) = analyze_key(&scale_piece(tonic, Mode::Minor), &params).unwrap();
            assert_eq!(est.key.mode, Mode::Minor, "tonic pc {tonic}");
            assert_eq!(fifth_pitch_class(est.key.fifth_index), tonic, "tonic pc {tonic}");
        }
    }

    #[test]
    fn octave_transposition_changes_nothing() {
        let params = SpiralParams::default();
        let base = scale_piece(2, Mode::Major);
        let up: Vec<Note> = base.iter().map(|x| Note { pitch: x.pitch + 12, ..*x }).collect();
        let (sa, ea) = analyze_key(&base, &params).unwrap();
        let (sb, eb) = analyze_key(&up, &params).unwrap();
        assert_eq!(ea, eb);
        let fa: Vec<i32> = sa.iter().map(|s| s.fifth_index).collect();
        let fb: Vec<i32> = sb.iter().map(|s| s.fifth_index).collect();
        assert_eq!(fa, fb);
    }
}
