//! Track role classification: features, forests, role assignment, and
//! filtered MIDI output.

pub mod eval;
pub mod features;
pub mod forest;
pub mod synth;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::midi::{build_note_list, EventKind, MidiFile, Note, Track, TrackEvent};

pub use eval::{evaluate_role, parse_label_file, split_by_song, EvalRow, EvalTable};
pub use features::{extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
pub use forest::{
    load_model, oob_accuracy, predict, save_model, train_forest, train_forest_seq, ForestModel,
    ForestParams, Tree, TreeNode,
};
pub use synth::{gen_corpus, gen_song, SynthSong};

/// The three extractable track roles, in assignment priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Role {
    Melody = 0,
    Bass = 1,
    Harmony = 2,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Melody, Role::Bass, Role::Harmony];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Melody => "melody",
            Role::Bass => "bass",
            Role::Harmony => "harmony",
        }
    }

    pub fn from_name(name: &str) -> Option<Role> {
        match name.to_ascii_lowercase().as_str() {
            "melody" => Some(Role::Melody),
            "bass" => Some(Role::Bass),
            "harmony" => Some(Role::Harmony),
            _ => None,
        }
    }

    pub fn from_byte(b: u8) -> Option<Role> {
        match b {
            0 => Some(Role::Melody),
            1 => Some(Role::Bass),
            2 => Some(Role::Harmony),
            _ => None,
        }
    }
}

/// A feature vector with its ground-truth labels and source identity.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrack {
    pub features: FeatureVector,
    pub labels: BTreeSet<Role>,
    pub file_id: String,
    pub track_index: usize,
}

/// Substring keyword lists used to bootstrap labels from track names.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordTable {
    pub melody: Vec<String>,
    pub bass: Vec<String>,
    pub harmony: Vec<String>,
}

impl Default for KeywordTable {
    fn default() -> Self {
        let list = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        KeywordTable {
            melody: list(&["melody", "vocal", "lead", "tune", "voice"]),
            bass: list(&["bass", "low end", "upright"]),
            harmony: list(&["chord", "pad", "guitar", "piano comp", "harmony", "comp"]),
        }
    }
}

/// Case-insensitive substring match of a track name against the keyword
/// table; roles are tried in priority order melody, bass, harmony.
pub fn keyword_role(name: &str, table: &KeywordTable) -> Option<Role> {
    let lower = name.to_ascii_lowercase();
    let hits = |kws: &[String]| kws.iter().any(|k| !k.is_empty() && lower.contains(k.as_str()));
    if hits(&table.melody) {
        Some(Role::Melody)
    } else if hits(&table.bass) {
        Some(Role::Bass)
    } else if hits(&table.harmony) {
        Some(Role::Harmony)
    } else {
        None
    }
}

/// The three per-role models as one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleModels {
    pub melody: ForestModel,
    pub bass: ForestModel,
    pub harmony: ForestModel,
}

impl RoleModels {
    pub fn get(&self, role: Role) -> &ForestModel {
        match role {
            Role::Melody => &self.melody,
            Role::Bass => &self.bass,
            Role::Harmony => &self.harmony,
        }
    }
}

/// Role probabilities of one scored track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackScores {
    pub track: usize,
    pub melody: f64,
    pub bass: f64,
    pub harmony: f64,
}

impl TrackScores {
    pub fn get(&self, role: Role) -> f64 {
        match role {
            Role::Melody => self.melody,
            Role::Bass => self.bass,
            Role::Harmony => self.harmony,
        }
    }
}

/// Final decision: at most one melody and one bass, any number of
/// harmony tracks; everything else is discarded.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RoleAssignment {
    pub melody: Option<usize>,
    pub bass: Option<usize>,
    pub harmony: Vec<usize>,
    pub discarded: Vec<usize>,
    /// Probabilities of every scored (non-drum, non-empty) track.
    pub scores: Vec<TrackScores>,
}

impl RoleAssignment {
    pub fn assigned_in_role_order(&self) -> Vec<(Role, usize)> {
        let mut out = Vec::new();
        if let Some(t) = self.melody {
            out.push((Role::Melody, t));
        }
        if let Some(t) = self.bass {
            out.push((Role::Bass, t));
        }
        for t in &self.harmony {
            out.push((Role::Harmony, *t));
        }
        out
    }
}

/// Scores every playable track and assigns roles greedily by probability.
///
/// Drum tracks and empty tracks are discarded before scoring. Candidates
/// with probability above 0.5 are taken best-first; equal probabilities
/// fall to the higher-priority role, then the lower track index. A track
/// takes at most one role.
pub fn assign_roles(file: &MidiFile, models: &RoleModels) -> RoleAssignment {
    let (notes, _, _) = build_note_list(file);
    let mut assignment = RoleAssignment::default();

    let mut scorable: Vec<usize> = Vec::new();
    for track_idx in 0..file.tracks.len() {
        let track_notes: Vec<&Note> = notes.iter().filter(|n| n.track == track_idx).collect();
        if track_notes.is_empty() {
            // Conductor or metadata track; not a candidate, not discarded.
            continue;
        }
        if track_notes.iter().all(|n| n.is_drum()) {
            assignment.discarded.push(track_idx);
            continue;
        }
        scorable.push(track_idx);
    }

    let mut candidates: Vec<(f64, Role, usize)> = Vec::new();
    for &track_idx in &scorable {
        let track_notes: Vec<Note> = notes.iter().filter(|n| n.track == track_idx).copied().collect();
        let Ok(fv) = extract_features(&track_notes, &notes) else { continue };
        let scores = TrackScores {
            track: track_idx,
            melody: predict(&models.melody, &fv).unwrap_or(0.0),
            bass: predict(&models.bass, &fv).unwrap_or(0.0),
            harmony: predict(&models.harmony, &fv).unwrap_or(0.0),
        };
        assignment.scores.push(scores);
        for role in Role::ALL {
            let p = scores.get(role);
            if p > 0.5 {
                candidates.push((p, role, track_idx));
            }
        }
    }

    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2))
    });
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    for (_, role, track_idx) in candidates {
        if taken.contains(&track_idx) {
            continue;
        }
        match role {
            Role::Melody if assignment.melody.is_none() => {
                assignment.melody = Some(track_idx);
                taken.insert(track_idx);
            }
            Role::Bass if assignment.bass.is_none() => {
                assignment.bass = Some(track_idx);
                taken.insert(track_idx);
            }
            Role::Harmony => {
                assignment.harmony.push(track_idx);
                taken.insert(track_idx);
            }
            _ => {}
        }
    }
    assignment.harmony.sort_unstable();
    for &track_idx in &scorable {
        if !taken.contains(&track_idx) {
            assignment.discarded.push(track_idx);
        }
    }
    assignment.discarded.sort_unstable();
    assignment
}

fn strip_names(track: &Track) -> Track {
    let events: Vec<TrackEvent> = track
        .events
        .iter()
        .filter(|e| !matches!(e.kind, EventKind::TrackName(_)))
        .cloned()
        .collect();
    Track { name: track.name.clone(), events }
}

/// Builds the filtered file: a conductor track holding every tempo and
/// time-signature event, then the assigned tracks in role order with
/// their names replaced by role names. Note content is untouched.
pub fn extract_tracks(file: &MidiFile, assignment: &RoleAssignment) -> MidiFile {
    let mut conductor_events: Vec<TrackEvent> = Vec::new();
    for track in &file.tracks {
        for ev in &track.events {
            if matches!(ev.kind, EventKind::Tempo(_) | EventKind::TimeSignature { .. }) {
                conductor_events.push(ev.clone());
            }
        }
    }
    conductor_events.sort_by_key(|e| e.tick);
    let last = conductor_events.last().map(|e| e.tick).unwrap_or(0);
    conductor_events.push(TrackEvent { tick: last, kind: EventKind::EndOfTrack });
    let conductor = Track { name: None, events: conductor_events };

    let mut tracks = vec![conductor];
    for (role, track_idx) in assignment.assigned_in_role_order() {
        let mut t = strip_names(&file.tracks[track_idx]);
        let name = role.as_str().as_bytes().to_vec();
        t.name = Some(name.clone());
        t.events.insert(0, TrackEvent { tick: 0, kind: EventKind::TrackName(name) });
        tracks.push(t);
    }
    MidiFile { format: 1, ppq: file.ppq, tracks }
}
