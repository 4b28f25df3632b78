//! Deterministic generator of stereotyped songs for classifier training.
//!
//! Each song carries a melody (mid-to-high stepwise line), a bass (low
//! roots and fifths on strong beats), a harmony track (block triads), and
//! sometimes drums. Track order is shuffled per song; role labels refer
//! to final track indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::Role;
use crate::midi::{EventKind, MidiFile, Track, TrackEvent};

pub const SYNTH_PPQ: u16 = 480;

/// A generated song with ground-truth role labels per track index.
#[derive(Debug, Clone)]
pub struct SynthSong {
    pub name: String,
    pub midi: MidiFile,
    pub labels: Vec<(usize, Role)>,
}

struct PendingNote {
    onset_beats: f64,
    duration_beats: f64,
    pitch: u8,
    velocity: u8,
    channel: u8,
}

fn beats_to_ticks(beats: f64) -> u64 {
    (beats * f64::from(SYNTH_PPQ)).round() as u64
}

fn track_from_notes(name: &str, notes: &[PendingNote]) -> Track {
    let mut events: Vec<(u64, bool, EventKind)> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        let on = beats_to_ticks(n.onset_beats);
        let off = beats_to_ticks(n.onset_beats + n.duration_beats);
        events.push((
            on,
            true,
            EventKind::NoteOn { channel: n.channel, pitch: n.pitch, velocity: n.velocity },
        ));
        events.push((
            off,
            false,
            EventKind::NoteOff { channel: n.channel, pitch: n.pitch, velocity: 0 },
        ));
    }
    // Offs before ons at equal ticks so touching notes re-trigger cleanly.
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut track = Track { name: Some(name.as_bytes().to_vec()), events: Vec::new() };
    track.events.push(TrackEvent { tick: 0, kind: EventKind::TrackName(name.as_bytes().to_vec()) });
    let last = events.last().map(|e| e.0).unwrap_or(0);
    for (tick, _, kind) in events {
        track.events.push(TrackEvent { tick, kind });
    }
    track.events.push(TrackEvent { tick: last, kind: EventKind::EndOfTrack });
    track
}

fn splitmix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const MAJOR: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];

fn melody_notes(rng: &mut ChaCha8Rng, root: u8, scale: &[u8; 7], bars: usize) -> Vec<PendingNote> {
    let mut notes = Vec::new();
    let mut degree = 7i32 + rng.gen_range(0..7);
    let mut t = 0.0f64;
    let end = bars as f64 * 4.0;
    while t < end {
        let dur: f64 = match rng.gen_range(0..6) {
            0 | 1 | 2 => 0.5,
            3 | 4 => 1.0,
            _ => 1.5,
        };
        if rng.gen_range(0..10) == 0 {
            t += 0.5;
            continue;
        }
        let step: i32 = match rng.gen_range(0..10) {
            0..=5 => if rng.gen() { 1 } else { -1 },
            6 | 7 => if rng.gen() { 2 } else { -2 },
            8 => 0,
            _ => if rng.gen() { 4 } else { -4 },
        };
        degree = (degree + step).clamp(5, 19);
        let octave = degree.div_euclid(7);
        let idx = degree.rem_euclid(7) as usize;
        let pitch = 48 + 12 * octave as u8 + (root + scale[idx]) % 12;
        notes.push(PendingNote {
            onset_beats: t,
            duration_beats: dur.min(end - t),
            pitch,
            velocity: 80 + rng.gen_range(0..30),
            channel: 0,
        });
        t += dur;
    }
    notes
}

fn bass_notes(rng: &mut ChaCha8Rng, root: u8, scale: &[u8; 7], bars: usize) -> Vec<PendingNote> {
    let mut notes = Vec::new();
    for bar in 0..bars {
        let t = bar as f64 * 4.0;
        let chord_degree = [0usize, 3, 4, 5][rng.gen_range(0..4)];
        let base = 28 + (root + scale[chord_degree]) % 12;
        let pattern = rng.gen_range(0..3);
        let mut push = |onset: f64, dur: f64, pitch: u8, rng: &mut ChaCha8Rng| {
            notes.push(PendingNote {
                onset_beats: onset,
                duration_beats: dur,
                pitch,
                velocity: 70 + rng.gen_range(0..30),
                channel: 1,
            });
        };
        match pattern {
            0 => {
                push(t, 2.0, base, rng);
                push(t + 2.0, 2.0, base + 7, rng);
            }
            1 => {
                for q in 0..4 {
                    push(t + q as f64, 1.0, if q % 2 == 0 { base } else { base + 7 }, rng);
                }
            }
            _ => push(t, 4.0, base, rng),
        }
    }
    notes
}

fn harmony_notes(rng: &mut ChaCha8Rng, root: u8, scale: &[u8; 7], bars: usize) -> Vec<PendingNote> {
    let mut notes = Vec::new();
    for bar in 0..bars {
        let t = bar as f64 * 4.0;
        let degree = [0usize, 3, 4, 5][rng.gen_range(0..4)];
        let (halves, dur) = if rng.gen_range(0..3) == 0 { (2, 2.0) } else { (1, 4.0) };
        for h in 0..halves {
            let onset = t + h as f64 * 2.0;
            for voice in [0usize, 2, 4] {
                let idx = (degree + voice) % 7;
                let octave_lift = if (degree + voice) >= 7 { 12 } else { 0 };
                let pitch = 52 + octave_lift + (root + scale[idx]) % 12;
                notes.push(PendingNote {
                    onset_beats: onset,
                    duration_beats: dur,
                    pitch,
                    velocity: 60 + rng.gen_range(0..25),
                    channel: 2,
                });
            }
        }
    }
    notes
}

fn drum_notes(bars: usize) -> Vec<PendingNote> {
    let mut notes = Vec::new();
    for bar in 0..bars {
        let t = bar as f64 * 4.0;
        for beat in 0..4 {
            let pitch = if beat % 2 == 0 { 36 } else { 38 };
            notes.push(PendingNote {
                onset_beats: t + beat as f64,
                duration_beats: 0.25,
                pitch,
                velocity: 100,
                channel: 9,
            });
        }
    }
    notes
}

const MELODY_NAMES: [&str; 4] = ["Melody", "Lead Vocal", "Tune", "Voice"];
const BASS_NAMES: [&str; 4] = ["Bass", "Bass Guitar", "Low End", "Upright"];
const HARMONY_NAMES: [&str; 4] = ["Chords", "Pad", "Piano Comp", "Rhythm Guitar"];

/// Generates one song deterministically from (seed, index).
pub fn gen_song(seed: u64, index: usize) -> SynthSong {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed, index as u64));
    let bars = 16 + rng.gen_range(0..17);
    let root: u8 = rng.gen_range(0..12);
    let scale = if rng.gen() { &MAJOR } else { &MINOR };

    let melody = melody_notes(&mut rng, root, scale, bars);
    let bass = bass_notes(&mut rng, root, scale, bars);
    let harmony = harmony_notes(&mut rng, root, scale, bars);

    // Half the tracks get role-keyword names, half get neutral names.
    let pick_name = |rng: &mut ChaCha8Rng, pool: &[&str; 4], fallback: &str| -> String {
        if rng.gen() {
            pool[rng.gen_range(0..pool.len())].to_string()
        } else {
            fallback.to_string()
        }
    };
    let melody_name = pick_name(&mut rng, &MELODY_NAMES, "Track A");
    let bass_name = pick_name(&mut rng, &BASS_NAMES, "Track B");
    let harmony_name = pick_name(&mut rng, &HARMONY_NAMES, "Track C");

    let mut role_tracks: Vec<(Role, Track)> = vec![
        (Role::Melody, track_from_notes(&melody_name, &melody)),
        (Role::Bass, track_from_notes(&bass_name, &bass)),
        (Role::Harmony, track_from_notes(&harmony_name, &harmony)),
    ];
    for i in (1..role_tracks.len()).rev() {
        let j = rng.gen_range(0..=i);
        role_tracks.swap(i, j);
    }
    let with_drums = rng.gen();

    let mut conductor = Track { name: None, events: Vec::new() };
    conductor.events.push(TrackEvent { tick: 0, kind: EventKind::Tempo(500_000) });
    conductor.events.push(TrackEvent {
        tick: 0,
        kind: EventKind::TimeSignature {
            numerator: 4,
            denominator_pow2: 2,
            clocks_per_click: 24,
            notated_32nds: 8,
        },
    });
    conductor.events.push(TrackEvent { tick: 0, kind: EventKind::EndOfTrack });

    let mut tracks = vec![conductor];
    let mut labels = Vec::new();
    for (role, track) in role_tracks {
        labels.push((tracks.len(), role));
        tracks.push(track);
    }
    if with_drums {
        tracks.push(track_from_notes("Drums", &drum_notes(bars)));
    }

    SynthSong {
        name: format!("synth_{index:04}"),
        midi: MidiFile { format: 1, ppq: SYNTH_PPQ, tracks },
        labels,
    }
}

/// Generates `count` songs; song `i` depends only on (seed, i).
pub fn gen_corpus(count: usize, seed: u64) -> Vec<SynthSong> {
    (0..count).map(|i| gen_song(seed, i)).collect()
}
