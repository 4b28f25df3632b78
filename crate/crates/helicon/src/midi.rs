//! Standard MIDI File parsing and writing (formats 0 and 1), plus the
//! beat-domain note list and bar arithmetic used by every analysis stage.
//!
//! Ticks convert to beats as tick / ppq; beats are quarter-note units
//! regardless of time signature. Channel 9 is the drum channel.

use serde::Serialize;

use crate::error::MidiError;

/// The drum channel; notes here are excluded from all tonal analysis.
pub const DRUM_CHANNEL: u8 = 9;

/// A parsed Standard MIDI File.
#[derive(Debug, Clone, PartialEq)]
pub struct MidiFile {
    /// 0 or 1. Format 0 implies exactly one track.
    pub format: u16,
    /// Ticks per quarter note; always positive.
    pub ppq: u16,
    pub tracks: Vec<Track>,
}

/// One track chunk, events ordered by absolute tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Track {
    /// Track-name meta bytes, preserved exactly for classifier labeling.
    pub name: Option<Vec<u8>>,
    pub events: Vec<TrackEvent>,
}

impl Track {
    /// Track name decoded leniently for display and keyword matching.
    pub fn name_lossy(&self) -> Option<String> {
        self.name.as_ref().map(|b| String::from_utf8_lossy(b).into_owned())
    }
}

/// A timed event with its absolute tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackEvent {
    pub tick: u64,
    pub kind: EventKind,
}

/// Event payload. Unknown meta and system-exclusive payloads are preserved
/// opaquely so writing a parsed file loses nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    NoteOff { channel: u8, pitch: u8, velocity: u8 },
    /// Tempo in microseconds per quarter note.
    Tempo(u32),
    /// Raw time-signature payload: denominator stored as the power of two.
    TimeSignature { numerator: u8, denominator_pow2: u8, clocks_per_click: u8, notated_32nds: u8 },
    TrackName(Vec<u8>),
    ProgramChange { channel: u8, program: u8 },
    EndOfTrack,
    /// Any other meta event, kept verbatim.
    Meta { meta_type: u8, data: Vec<u8> },
    /// System-exclusive payload, status byte included.
    SysEx(Vec<u8>),
    /// Any other channel message: status byte plus its one or two data bytes.
    Channel { status: u8, data: Vec<u8> },
}

/// A pitched note in beat units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Note {
    pub onset_beats: f64,
    /// Always positive; zero-length pairings are dropped and counted.
    pub duration_beats: f64,
    pub pitch: u8,
    pub velocity: u8,
    pub track: usize,
    pub channel: u8,
}

impl Note {
    pub fn is_drum(&self) -> bool {
        self.channel == DRUM_CHANNEL
    }

    pub fn end_beats(&self) -> f64 {
        self.onset_beats + self.duration_beats
    }

    pub fn pitch_class(&self) -> u8 {
        self.pitch % 12
    }
}

/// Time-signature spans in beat units, always starting at beat 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSigMap {
    entries: Vec<TimeSigEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSigEntry {
    pub start_beat: f64,
    pub numerator: u8,
    pub denominator: u8,
}

impl Default for TimeSigMap {
    fn default() -> Self {
        TimeSigMap {
            entries: vec![TimeSigEntry { start_beat: 0.0, numerator: 4, denominator: 4 }],
        }
    }
}

impl TimeSigMap {
    /// Builds a map from (start_beat, numerator, denominator) triples.
    /// A 4/4 entry at beat 0 is inserted when absent; duplicates at one
    /// beat keep the last; entries end up strictly increasing.
    pub fn from_entries(mut entries: Vec<TimeSigEntry>) -> Self {
        entries.sort_by(|a, b| a.start_beat.total_cmp(&b.start_beat));
        let mut dedup: Vec<TimeSigEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match dedup.last_mut() {
                Some(last) if last.start_beat == e.start_beat => *last = e,
                _ => dedup.push(e),
            }
        }
        if dedup.first().map(|e| e.start_beat != 0.0).unwrap_or(true) {
            dedup.insert(0, TimeSigEntry { start_beat: 0.0, numerator: 4, denominator: 4 });
        }
        TimeSigMap { entries: dedup }
    }

    pub fn entries(&self) -> &[TimeSigEntry] {
        &self.entries
    }

    fn beats_per_bar(e: &TimeSigEntry) -> f64 {
        f64::from(e.numerator) * 4.0 / f64::from(e.denominator)
    }

    /// 1-based bar index of a beat. An x/y signature spans x*(4/y) beats per
    /// bar; a beat exactly on a boundary belongs to the bar it opens.
    pub fn bar_of(&self, beat: f64) -> usize {
        let beat = beat.max(0.0);
        let mut bars_before = 0usize;
        for (i, e) in self.entries.iter().enumerate() {
            let span_end = self.entries.get(i + 1).map(|n| n.start_beat);
            let bar_len = Self::beats_per_bar(e);
            match span_end {
                Some(end) if beat >= end => {
                    // A partial final bar of the span still occupies a slot.
                    bars_before += (((end - e.start_beat) / bar_len).ceil() as usize).max(1);
                }
                _ => {
                    return bars_before + ((beat - e.start_beat) / bar_len).floor() as usize + 1;
                }
            }
        }
        bars_before.max(1)
    }

    /// Start beat of a 1-based bar index; inverse of `bar_of` on boundaries.
    pub fn bar_start(&self, bar: usize) -> f64 {
        let target = bar.max(1) - 1;
        let mut bars_before = 0usize;
        for (i, e) in self.entries.iter().enumerate() {
            let bar_len = Self::beats_per_bar(e);
            let bars_in_span = match self.entries.get(i + 1) {
                Some(next) => (((next.start_beat - e.start_beat) / bar_len).ceil() as usize).max(1),
                None => usize::MAX - bars_before,
            };
            if target - bars_before < bars_in_span {
                return e.start_beat + (target - bars_before) as f64 * bar_len;
            }
            bars_before += bars_in_span;
        }
        0.0
    }
}

/// Counters for repairs applied while building the note list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// Note-offs with no matching note-on, dropped.
    pub dangling_note_offs: usize,
    /// Note-ons never closed, terminated at their track's final tick.
    pub unterminated_note_ons: usize,
    /// Pairings that produced zero duration, dropped.
    pub zero_length_dropped: usize,
}

/// Reads one SMF variable-length quantity at `offset`.
///
/// Returns the decoded value (< 2^28) and the number of bytes consumed (1-4).
pub fn read_vlq(bytes: &[u8], offset: usize) -> Result<(u32, usize), MidiError> {
    let mut value: u32 = 0;
    for i in 0..4 {
        let b = *bytes.get(offset + i).ok_or(MidiError::MalformedVlq)?;
        value = (value << 7) | u32::from(b & 0x7F);
        if b & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    Err(MidiError::MalformedVlq)
}

/// Encodes a value < 2^28 as an SMF variable-length quantity.
pub fn encode_vlq(value: u32) -> Vec<u8> {
    debug_assert!(value < (1 << 28));
    let mut out = vec![(value & 0x7F) as u8];
    let mut v = value >> 7;
    while v > 0 {
        out.push(((v & 0x7F) as u8) | 0x80);
        v >>= 7;
    }
    out.reverse();
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.pos + n > self.end {
            return Err(MidiError::BadChunk("event data overruns chunk".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8, MidiError> {
        Ok(self.take(1)?[0])
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let (v, n) = read_vlq(&self.bytes[..self.end], self.pos)?;
        self.pos += n;
        Ok(v)
    }
}

/// Parses an SMF byte buffer into tracks of absolute-tick events.
///
/// Handles running status and note-on velocity 0 (normalized to a note-off).
/// Unknown chunk types are skipped; unknown events are preserved opaquely.
/// SMPTE division and formats other than 0 and 1 are rejected.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiFile, MidiError> {
    if bytes.len() < 14 || &bytes[0..4] != b"MThd" {
        return Err(MidiError::BadHeader("missing MThd chunk"));
    }
    let header_len = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    if header_len < 6 || 8 + header_len > bytes.len() {
        return Err(MidiError::BadHeader("truncated MThd chunk"));
    }
    let format = u16::from_be_bytes([bytes[8], bytes[9]]);
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format));
    }
    let division = u16::from_be_bytes([bytes[12], bytes[13]]);
    if division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedDivision);
    }
    if division == 0 {
        return Err(MidiError::BadHeader("ticks-per-quarter-note division is zero"));
    }

    let mut tracks = Vec::new();
    let mut pos = 8 + header_len;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_be_bytes([bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]])
            as usize;
        let body_start = pos + 8;
        if body_start + len > bytes.len() {
            return Err(MidiError::BadChunk(format!(
                "chunk length {len} overruns buffer at offset {pos}"
            )));
        }
        if id == b"MTrk" {
            tracks.push(parse_track(bytes, body_start, body_start + len)?);
        }
        pos = body_start + len;
    }
    if pos != bytes.len() {
        return Err(MidiError::BadChunk("trailing bytes after final chunk".into()));
    }
    if tracks.is_empty() {
        return Err(MidiError::BadHeader("file contains no MTrk chunk"));
    }
    if format == 0 && tracks.len() != 1 {
        return Err(MidiError::BadHeader("format 0 requires exactly one track"));
    }
    Ok(MidiFile { format, ppq: division, tracks })
}

fn parse_track(bytes: &[u8], start: usize, end: usize) -> Result<Track, MidiError> {
    let mut cur = Cursor { bytes, pos: start, end };
    let mut track = Track::default();
    let mut tick: u64 = 0;
    let mut running_status: Option<u8> = None;

    while cur.pos < cur.end {
        tick += u64::from(cur.vlq()?);
        let first = cur.byte()?;
        let status = if first & 0x80 != 0 {
            first
        } else {
            // Data byte under running status; rewind to re-read it as data.
            cur.pos -= 1;
            running_status
                .ok_or_else(|| MidiError::BadChunk("data byte with no running status".into()))?
        };

        let kind = match status {
            0xFF => {
                running_status = None;
                let meta_type = cur.byte()?;
                let len = cur.vlq()? as usize;
                let data = cur.take(len)?.to_vec();
                match meta_type {
                    0x03 => {
                        track.name.get_or_insert_with(|| data.clone());
                        EventKind::TrackName(data)
                    }
                    0x51 if data.len() == 3 => EventKind::Tempo(
                        u32::from(data[0]) << 16 | u32::from(data[1]) << 8 | u32::from(data[2]),
                    ),
                    0x58 if data.len() == 4 => EventKind::TimeSignature {
                        numerator: data[0],
                        denominator_pow2: data[1],
                        clocks_per_click: data[2],
                        notated_32nds: data[3],
                    },
                    0x2F => EventKind::EndOfTrack,
                    _ => EventKind::Meta { meta_type, data },
                }
            }
            0xF0 | 0xF7 => {
                running_status = None;
                let len = cur.vlq()? as usize;
                let mut payload = vec![status];
                payload.extend_from_slice(cur.take(len)?);
                EventKind::SysEx(payload)
            }
            s if s >= 0x80 => {
                running_status = Some(s);
                let channel = s & 0x0F;
                match s & 0xF0 {
                    0x80 => {
                        let d = cur.take(2)?;
                        EventKind::NoteOff { channel, pitch: d[0] & 0x7F, velocity: d[1] & 0x7F }
                    }
                    0x90 => {
                        let d = cur.take(2)?;
                        let (pitch, velocity) = (d[0] & 0x7F, d[1] & 0x7F);
                        if velocity == 0 {
                            // Note-on with velocity 0 is a note-off by convention.
                            EventKind::NoteOff { channel, pitch, velocity: 0 }
                        } else {
                            EventKind::NoteOn { channel, pitch, velocity }
                        }
                    }
                    0xC0 => EventKind::ProgramChange { channel, program: cur.byte()? & 0x7F },
                    0xD0 => EventKind::Channel { status: s, data: cur.take(1)?.to_vec() },
                    _ => EventKind::Channel { status: s, data: cur.take(2)?.to_vec() },
                }
            }
            _ => unreachable!("status bytes are >= 0x80 here"),
        };
        let is_end = matches!(kind, EventKind::EndOfTrack);
        track.events.push(TrackEvent { tick, kind });
        if is_end {
            break;
        }
    }
    if cur.pos != cur.end {
        return Err(MidiError::BadChunk("track data continues past end-of-track".into()));
    }
    Ok(track)
}

/// Builds the beat-domain note list and time-signature map.
///
/// Note-on/note-off pairs match per (track, channel, pitch) in FIFO order.
/// Unterminated notes close at their track's final event tick; dangling
/// offs and zero-length pairings are dropped. Notes are sorted by
/// (onset, track, pitch).
pub fn build_note_list(file: &MidiFile) -> (Vec<Note>, TimeSigMap, Diagnostics) {
    let ppq = f64::from(file.ppq);
    let mut notes = Vec::new();
    let mut sig_entries = Vec::new();
    let mut diags = Diagnostics::default();

    for (track_idx, track) in file.tracks.iter().enumerate() {
        // FIFO queues of (onset_tick, velocity) per (channel, pitch).
        let mut open: std::collections::HashMap<(u8, u8), std::collections::VecDeque<(u64, u8)>> =
            std::collections::HashMap::new();
        let final_tick = track.events.last().map(|e| e.tick).unwrap_or(0);
        let close = |onset: u64, off: u64, velocity: u8, pitch: u8, channel: u8,
                         notes: &mut Vec<Note>, diags: &mut Diagnostics| {
            if off <= onset {
                diags.zero_length_dropped += 1;
                return;
            }
            notes.push(Note {
                onset_beats: onset as f64 / ppq,
                duration_beats: (off - onset) as f64 / ppq,
                pitch,
                velocity,
                track: track_idx,
                channel,
            });
        };
        for ev in &track.events {
            match &ev.kind {
                EventKind::NoteOn { channel, pitch, velocity } => {
                    open.entry((*channel, *pitch)).or_default().push_back((ev.tick, *velocity));
                }
                EventKind::NoteOff { channel, pitch, .. } => {
                    match open.get_mut(&(*channel, *pitch)).and_then(|q| q.pop_front()) {
                        Some((onset, vel)) => {
                            close(onset, ev.tick, vel, *pitch, *channel, &mut notes, &mut diags)
                        }
                        None => diags.dangling_note_offs += 1,
                    }
                }
                EventKind::TimeSignature { numerator, denominator_pow2, .. } => {
                    sig_entries.push(TimeSigEntry {
                        start_beat: ev.tick as f64 / ppq,
                        numerator: *numerator,
                        denominator: 1u8 << (*denominator_pow2).min(6),
                    });
                }
                _ => {}
            }
        }
        // Deterministic ordering for leftovers regardless of hash-map order.
        let mut leftovers: Vec<((u8, u8), std::collections::VecDeque<(u64, u8)>)> =
            open.into_iter().collect();
        leftovers.sort_by_key(|(k, _)| *k);
        for ((channel, pitch), queue) in leftovers {
            for (onset, vel) in queue {
                diags.unterminated_note_ons += 1;
                close(onset, final_tick, vel, pitch, channel, &mut notes, &mut diags);
            }
        }
    }

    notes.sort_by(|a, b| {
        a.onset_beats
            .total_cmp(&b.onset_beats)
            .then(a.track.cmp(&b.track))
            .then(a.pitch.cmp(&b.pitch))
    });
    (notes, TimeSigMap::from_entries(sig_entries), diags)
}

/// End of the piece in beats: the latest note end, or 0 with no notes.
pub fn piece_end_beat(notes: &[Note]) -> f64 {
    notes.iter().map(|n| n.end_beats()).fold(0.0, f64::max)
}

/// Serializes to a format-1 SMF with the original ppq.
///
/// Events are written with explicit status bytes; every track gains an
/// end-of-track event at its final tick if it lacks one.
pub fn write_smf(file: &MidiFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(file.tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&file.ppq.to_be_bytes());

    for track in &file.tracks {
        let mut body = Vec::new();
        let mut last_tick: u64 = 0;
        let mut has_end = false;
        for ev in &track.events {
            let delta = ev.tick.saturating_sub(last_tick);
            last_tick = ev.tick.max(last_tick);
            if matches!(ev.kind, EventKind::EndOfTrack) {
                if has_end {
                    continue;
                }
                has_end = true;
            }
            body.extend_from_slice(&encode_vlq(delta as u32));
            write_event(&ev.kind, &mut body);
        }
        if !has_end {
            body.push(0x00);
            body.extend_from_slice(&[0xFF, 0x2F, 0x00]);
        }
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    out
}

fn write_event(kind: &EventKind, body: &mut Vec<u8>) {
    match kind {
        EventKind::NoteOn { channel, pitch, velocity } => {
            body.extend_from_slice(&[0x90 | channel, *pitch, *velocity]);
        }
        EventKind::NoteOff { channel, pitch, velocity } => {
            body.extend_from_slice(&[0x80 | channel, *pitch, *velocity]);
        }
        EventKind::Tempo(us) => {
            body.extend_from_slice(&[0xFF, 0x51, 0x03]);
            body.extend_from_slice(&us.to_be_bytes()[1..]);
        }
        EventKind::TimeSignature { numerator, denominator_pow2, clocks_per_click, notated_32nds } => {
            body.extend_from_slice(&[0xFF, 0x58, 0x04, *numerator, *denominator_pow2,
                *clocks_per_click, *notated_32nds]);
        }
        EventKind::TrackName(data) => {
            body.extend_from_slice(&[0xFF, 0x03]);
            body.extend_from_slice(&encode_vlq(data.len() as u32));
            body.extend_from_slice(data);
        }
        EventKind::ProgramChange { channel, program } => {
            body.extend_from_slice(&[0xC0 | channel, *program]);
        }
        EventKind::EndOfTrack => body.extend_from_slice(&[0xFF, 0x2F, 0x00]),
        EventKind::Meta { meta_type, data } => {
            body.extend_from_slice(&[0xFF, *meta_type]);
            body.extend_from_slice(&encode_vlq(data.len() as u32));
            body.extend_from_slice(data);
        }
        EventKind::SysEx(payload) => {
            body.push(payload[0]);
            body.extend_from_slice(&encode_vlq((payload.len() - 1) as u32));
            body.extend_from_slice(&payload[1..]);
        }
        EventKind::Channel { status, data } => {
            body.push(*status);
            body.extend_from_slice(data);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vlq_spec_cases() {
        assert_eq!(read_vlq(&[0x00], 0).unwrap(), (0, 1));
        assert_eq!(read_vlq(&[0x81, 0x00], 0).unwrap(), (128, 2));
        assert_eq!(read_vlq(&[0xFF, 0xFF, 0xFF, 0x7F], 0).unwrap(), (268_435_455, 4));
        assert!(matches!(read_vlq(&[0xFF, 0xFF, 0xFF, 0xFF], 0), Err(MidiError::MalformedVlq)));
        assert!(matches!(read_vlq(&[], 0), Err(MidiError::MalformedVlq)));
    }

    #[test]
    fn vlq_round_trip_samples() {
        for v in [0u32, 1, 127, 128, 0x3FFF, 0x4000, 0x1F_FFFF, 0x20_0000, (1 << 28) - 1] {
            let enc = encode_vlq(v);
            assert!(enc.len() <= 4);
            assert_eq!(read_vlq(&enc, 0).unwrap(), (v, enc.len()));
        }
    }

    fn minimal_file() -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"MThd");
        b.extend_from_slice(&6u32.to_be_bytes());
        b.extend_from_slice(&0u16.to_be_bytes());
        b.extend_from_slice(&1u16.to_be_bytes());
        b.extend_from_slice(&480u16.to_be_bytes());
        b.extend_from_slice(b"MTrk");
        b.extend_from_slice(&4u32.to_be_bytes());
        b.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        b
    }

    #[test]
    fn parses_minimal_file() {
        let f = parse_smf(&minimal_file()).unwrap();
        assert_eq!(f.format, 0);
        assert_eq!(f.ppq, 480);
        assert_eq!(f.tracks.len(), 1);
        let (notes, sigs, diags) = build_note_list(&f);
        assert!(notes.is_empty());
        assert_eq!(sigs.entries().len(), 1);
        assert_eq!(diags, Diagnostics::default());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(parse_smf(b"nope"), Err(MidiError::BadHeader(_))));
        let mut smpte = minimal_file();
        smpte[12] = 0xE8; // negative SMPTE fps marker
        assert!(matches!(parse_smf(&smpte), Err(MidiError::UnsupportedDivision)));
        let mut fmt2 = minimal_file();
        fmt2[9] = 2;
        assert!(matches!(parse_smf(&fmt2), Err(MidiError::UnsupportedFormat(2))));
        let mut short = minimal_file();
        short.truncate(20);
        assert!(parse_smf(&short).is_err());
    }

    #[test]
    fn velocity_zero_note_on_closes_note() {
        let mut b = Vec::new();
        b.extend_from_slice(b"MThd");
        b.extend_from_slice(&6u32.to_be_bytes());
        b.extend_from_slice(&[0, 0, 0, 1]);
        b.extend_from_slice(&480u16.to_be_bytes());
        // note-on C4, then running-status note-on velocity 0 after 480 ticks
        let body = [0x00, 0x90, 60, 100, 0x83, 0x60, 60, 0, 0x00, 0xFF, 0x2F, 0x00];
        b.extend_from_slice(b"MTrk");
        b.extend_from_slice(&(body.len() as u32).to_be_bytes());
        b.extend_from_slice(&body);
        let f = parse_smf(&b).unwrap();
        let (notes, _, diags) = build_note_list(&f);
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].onset_beats, 0.0);
        assert_eq!(notes[0].duration_beats, 1.0);
        assert_eq!(notes[0].velocity, 100);
        assert_eq!(diags, Diagnostics::default());
    }

    #[test]
    fn fifo_pairing_for_overlapping_same_pitch() {
        let mut t = Track::default();
        t.events = vec![
            TrackEvent { tick: 0, kind: EventKind::NoteOn { channel: 0, pitch: 60, velocity: 80 } },
            TrackEvent { tick: 240, kind: EventKind::NoteOn { channel: 0, pitch: 60, velocity: 90 } },
            TrackEvent { tick: 480, kind: EventKind::NoteOff { channel: 0, pitch: 60, velocity: 0 } },
            TrackEvent { tick: 960, kind: EventKind::NoteOff { channel: 0, pitch: 60, velocity: 0 } },
            TrackEvent { tick: 960, kind: EventKind::EndOfTrack },
        ];
        let f = MidiFile { format: 1, ppq: 480, tracks: vec![t] };
        let (notes, _, _) = build_note_list(&f);
        assert_eq!(notes.len(), 2);
        // First on matches first off.
        assert_eq!(notes[0].velocity, 80);
        assert_eq!(notes[0].duration_beats, 1.0);
        assert_eq!(notes[1].velocity, 90);
        assert_eq!(notes[1].duration_beats, 1.5);
    }

    #[test]
    fn unterminated_and_dangling_notes_are_counted() {
        let mut t = Track::default();
        t.events = vec![
            TrackEvent { tick: 0, kind: EventKind::NoteOff { channel: 0, pitch: 72, velocity: 0 } },
            TrackEvent { tick: 0, kind: EventKind::NoteOn { channel: 0, pitch: 60, velocity: 80 } },
            TrackEvent { tick: 960, kind: EventKind::EndOfTrack },
        ];
        let f = MidiFile { format: 1, ppq: 480, tracks: vec![t] };
        let (notes, _, diags) = build_note_list(&f);
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].duration_beats, 2.0);
        assert_eq!(diags.dangling_note_offs, 1);
        assert_eq!(diags.unterminated_note_ons, 1);
    }

    #[test]
    fn bar_of_follows_signature_spans() {
        let m = TimeSigMap::default();
        assert_eq!(m.bar_of(0.0), 1);
        assert_eq!(m.bar_of(3.999), 1);
        assert_eq!(m.bar_of(4.0), 2);
        let waltz = TimeSigMap::from_entries(vec![TimeSigEntry {
            start_beat: 0.0,
            numerator: 3,
            denominator: 4,
        }]);
        assert_eq!(waltz.bar_of(7.0), 3);
        // 4/4 for two bars, then 6/8 (3-beat bars).
        let mixed = TimeSigMap::from_entries(vec![
            TimeSigEntry { start_beat: 0.0, numerator: 4, denominator: 4 },
            TimeSigEntry { start_beat: 8.0, numerator: 6, denominator: 8 },
        ]);
        assert_eq!(mixed.bar_of(8.0), 3);
        assert_eq!(mixed.bar_of(11.0), 4);
        assert_eq!(mixed.bar_start(3), 8.0);
        assert_eq!(mixed.bar_start(4), 11.0);
    }

    #[test]
    fn bar_of_is_monotone() {
        let mixed = TimeSigMap::from_entries(vec![
            TimeSigEntry { start_beat: 0.0, numerator: 4, denominator: 4 },
            TimeSigEntry { start_beat: 6.0, numerator: 3, denominator: 4 },
            TimeSigEntry { start_beat: 15.0, numerator: 7, denominator: 8 },
        ]);
        let mut last = 0;
        for i in 0..400 {
            let bar = mixed.bar_of(i as f64 * 0.125);
            assert!(bar >= last);
            last = bar;
        }
    }

    #[test]
    fn write_then_parse_reproduces_note_list() {
        let mut conductor = Track::default();
        conductor.events = vec![
            TrackEvent { tick: 0, kind: EventKind::Tempo(500_000) },
            TrackEvent {
                tick: 0,
                kind: EventKind::TimeSignature {
                    numerator: 3,
                    denominator_pow2: 2,
                    clocks_per_click: 24,
                    notated_32nds: 8,
                },
            },
            TrackEvent { tick: 0, kind: EventKind::EndOfTrack },
        ];
        let mut melody = Track::default();
        melody.name = Some(b"lead".to_vec());
        melody.events = vec![
            TrackEvent { tick: 0, kind: EventKind::TrackName(b"lead".to_vec()) },
            TrackEvent { tick: 0, kind: EventKind::NoteOn { channel: 0, pitch: 64, velocity: 90 } },
            TrackEvent { tick: 240, kind: EventKind::NoteOff { channel: 0, pitch: 64, velocity: 0 } },
            TrackEvent { tick: 240, kind: EventKind::NoteOn { channel: 0, pitch: 67, velocity: 70 } },
            TrackEvent { tick: 720, kind: EventKind::NoteOff { channel: 0, pitch: 67, velocity: 0 } },
            TrackEvent { tick: 720, kind: EventKind::EndOfTrack },
        ];
        let f = MidiFile { format: 1, ppq: 240, tracks: vec![conductor, melody] };
        let reparsed = parse_smf(&write_smf(&f)).unwrap();
        assert_eq!(reparsed.ppq, 240);
        assert_eq!(reparsed.tracks[1].name_lossy().as_deref(), Some("lead"));
        let (a, sa, _) = build_note_list(&f);
        let (b, sb, _) = build_note_list(&reparsed);
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
