//! Sliding-window tension measures and key-change flagging.
//!
//! Each window is a weighted point cloud in the spiral array. Three
//! measures per window: cloud diameter (dissonance), cloud momentum
//! (tonal movement), tensile strain (distance to the key). A 16-beat
//! mean-strain ratio rule flags likely key changes.

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::midi::TimeSigMap;
use crate::spiral::{center_of_effect, distance, key_center, pitch_position, KeyId, Point3, SpiralParams};
use crate::tonal::{
    detect_key, detect_key_in_class, estimate_key_index, spelling_class, KeyEstimate, SpelledNote,
};

/// One half note, in quarter-note beats.
pub const DEFAULT_WINDOW_BEATS: f64 = 2.0;

/// Mean strains below this are treated as silence by the change detector.
pub const STRAIN_EPSILON: f64 = 1e-6;

const CHANGE_SPAN_BEATS: f64 = 16.0;
const CHANGE_RUN_LENGTH: usize = 4;
const CHANGE_RATIO: f64 = 2.0;

/// Weighted pitch cloud for one analysis window. Points are merged per
/// fifth index with summed weights, ordered by fifth index.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    pub start_beat: f64,
    pub end_beat: f64,
    pub weighted_points: Vec<(Point3, f64)>,
}

impl Cloud {
    pub fn is_empty(&self) -> bool {
        self.weighted_points.is_empty()
    }

    pub fn center(&self) -> Option<Point3> {
        center_of_effect(&self.weighted_points).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowTension {
    pub start_beat: f64,
    pub diameter: f64,
    pub momentum: f64,
    pub strain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarTension {
    pub bar: usize,
    pub diameter: f64,
    pub momentum: f64,
    pub strain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyChange {
    pub bar: usize,
    pub beat: f64,
}

/// Full tension analysis of a piece at one window length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensionSeries {
    pub window_beats: f64,
    pub windows: Vec<WindowTension>,
    /// One entry per bar from 1 through the bar of the last window start;
    /// bars containing no window start carry zeros.
    pub per_bar: Vec<BarTension>,
    pub key_changes: Vec<KeyChange>,
}

/// Which adjacent 16-beat span the change detector compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ChangeDirection {
    /// Current span over the span immediately before it.
    #[default]
    Backward,
    /// Current span over the span immediately after it.
    Forward,
}

/// Key in force from `start_beat` until the next segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentKey {
    pub start_beat: f64,
    pub estimate: KeyEstimate,
}

/// Splits spelled notes into consecutive windows [i*w, (i+1)*w) covering
/// [0, piece_end_beat]. A note adds its overlap length as weight to every
/// window it touches; windows without notes stay empty but are retained.
pub fn window_clouds(
    spelled: &[SpelledNote],
    window_beats: f64,
    piece_end_beat: f64,
    params: &SpiralParams,
) -> Vec<Cloud> {
    assert!(window_beats > 0.0, "window length must be positive");
    let count = (piece_end_beat / window_beats).ceil().max(0.0) as usize;
    (0..count).map(|i| one_cloud(spelled, window_beats, i, params)).collect()
}

fn one_cloud(spelled: &[SpelledNote], w: f64, index: usize, params: &SpiralParams) -> Cloud {
    let lo = index as f64 * w;
    let hi = lo + w;
    let mut merged: BTreeMap<i32, f64> = BTreeMap::new();
    for s in spelled {
        if s.note.is_drum() {
            continue;
        }
        let overlap = s.note.end_beats().min(hi) - s.note.onset_beats.max(lo);
        if overlap > 0.0 {
            *merged.entry(s.fifth_index).or_insert(0.0) += overlap;
        }
    }
    let weighted_points = merged
        .into_iter()
        .map(|(fifth, weight)| (pitch_position(fifth, params), weight))
        .collect();
    Cloud { start_beat: lo, end_beat: hi, weighted_points }
}

/// Maximum pairwise distance among the cloud's distinct points;
/// 0 for empty and single-point clouds.
pub fn cloud_diameter(cloud: &Cloud) -> f64 {
    let pts = &cloud.weighted_points;
    let mut max = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            max = max.max(distance(pts[i].0, pts[j].0));
        }
    }
    max
}

/// Distance between the two clouds' centers of effect; 0 if either is empty.
pub fn cloud_momentum(prev: &Cloud, cur: &Cloud) -> f64 {
    match (prev.center(), cur.center()) {
        (Some(a), Some(b)) => distance(a, b),
        _ => 0.0,
    }
}

/// Distance from the cloud's center of effect to the key center;
/// 0 for empty clouds.
pub fn tensile_strain(cloud: &Cloud, key: KeyId, params: &SpiralParams) -> f64 {
    match cloud.center() {
        Some(ce) => distance(ce, key_center(key, params)),
        None => 0.0,
    }
}

fn piece_end(spelled: &[SpelledNote]) -> f64 {
    spelled.iter().map(|s| s.note.end_beats()).fold(0.0, f64::max)
}

fn series_from_clouds(
    clouds: &[Cloud],
    centers: &[Option<Point3>],
    diameters: Vec<f64>,
    strains: Vec<f64>,
    window_beats: f64,
    sigs: &TimeSigMap,
) -> TensionSeries {
    let windows: Vec<WindowTension> = clouds
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let momentum = if i == 0 {
                0.0
            } else {
                match (centers[i - 1], centers[i]) {
                    (Some(a), Some(b)) => distance(a, b),
                    _ => 0.0,
                }
            };
            WindowTension { start_beat: c.start_beat, diameter: diameters[i], momentum, strain: strains[i] }
        })
        .collect();
    let per_bar = aggregate_per_bar(&windows, sigs);
    let mut series = TensionSeries { window_beats, windows, per_bar, key_changes: Vec::new() };
    series.key_changes = detect_key_changes(&series, sigs);
    series
}

fn aggregate_per_bar(windows: &[WindowTension], sigs: &TimeSigMap) -> Vec<BarTension> {
    let last_bar = windows.last().map(|w| sigs.bar_of(w.start_beat)).unwrap_or(0);
    let mut sums = vec![(0.0f64, 0.0f64, 0.0f64, 0usize); last_bar + 1];
    for w in windows {
        let b = sigs.bar_of(w.start_beat);
        let s = &mut sums[b];
        s.0 += w.diameter;
        s.1 += w.momentum;
        s.2 += w.strain;
        s.3 += 1;
    }
    (1..=last_bar)
        .map(|bar| {
            let (d, m, s, n) = sums[bar];
            if n == 0 {
                BarTension { bar, diameter: 0.0, momentum: 0.0, strain: 0.0 }
            } else {
                let k = n as f64;
                BarTension { bar, diameter: d / k, momentum: m / k, strain: s / k }
            }
        })
        .collect()
}

/// Computes the full tension series for a piece under one global key.
///
/// Windows are independent, so the default build evaluates them in
/// parallel; results are ordered by start beat and bit-identical to the
/// sequential variant.
pub fn compute_tension(
    spelled: &[SpelledNote],
    key: KeyId,
    window_beats: f64,
    sigs: &TimeSigMap,
    params: &SpiralParams,
) -> TensionSeries {
    #[cfg(feature = "parallel")]
    {
        assert!(window_beats > 0.0, "window length must be positive");
        let count = (piece_end(spelled) / window_beats).ceil().max(0.0) as usize;
        let anchor = key_center(key, params);
        let rows: Vec<(Cloud, Option<Point3>, f64, f64)> = (0..count)
            .into_par_iter()
            .map(|i| {
                let cloud = one_cloud(spelled, window_beats, i, params);
                let ce = cloud.center();
                let diameter = cloud_diameter(&cloud);
                let strain = ce.map(|c| distance(c, anchor)).unwrap_or(0.0);
                (cloud, ce, diameter, strain)
            })
            .collect();
        let clouds: Vec<Cloud> = rows.iter().map(|r| r.0.clone()).collect();
        let centers: Vec<Option<Point3>> = rows.iter().map(|r| r.1).collect();
        let diameters: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let strains: Vec<f64> = rows.iter().map(|r| r.3).collect();
        series_from_clouds(&clouds, &centers, diameters, strains, window_beats, sigs)
    }
    #[cfg(not(feature = "parallel"))]
    {
        compute_tension_seq(spelled, key, window_beats, sigs, params)
    }
}

/// Single-threaded variant of `compute_tension`; always available.
pub fn compute_tension_seq(
    spelled: &[SpelledNote],
    key: KeyId,
    window_beats: f64,
    sigs: &TimeSigMap,
    params: &SpiralParams,
) -> TensionSeries {
    let clouds = window_clouds(spelled, window_beats, piece_end(spelled), params);
    let anchor = key_center(key, params);
    let centers: Vec<Option<Point3>> = clouds.iter().map(|c| c.center()).collect();
    let diameters: Vec<f64> = clouds.iter().map(cloud_diameter).collect();
    let strains: Vec<f64> = centers
        .iter()
        .map(|ce| ce.map(|c| distance(c, anchor)).unwrap_or(0.0))
        .collect();
    series_from_clouds(&clouds, &centers, diameters, strains, window_beats, sigs)
}

/// Flags key changes with the default backward comparison.
pub fn detect_key_changes(series: &TensionSeries, sigs: &TimeSigMap) -> Vec<KeyChange> {
    detect_key_changes_with(series, sigs, ChangeDirection::Backward)
}

/// Slides a 16-beat span in window-length steps over the strain curve.
/// A step is hot when its span's mean strain exceeds twice the adjacent
/// span's mean (adjacent mean above epsilon). Four consecutive hot steps
/// flag a change at the first hot span's start beat; further flags are
/// suppressed for the next 16 beats and the run restarts either way.
pub fn detect_key_changes_with(
    series: &TensionSeries,
    sigs: &TimeSigMap,
    direction: ChangeDirection,
) -> Vec<KeyChange> {
    let w = series.window_beats;
    let m = ((CHANGE_SPAN_BEATS / w).round() as usize).max(1);
    let strains: Vec<f64> = series.windows.iter().map(|x| x.strain).collect();
    let n = strains.len();
    let mut flags = Vec::new();
    if n < 2 * m {
        return flags;
    }
    let mean = |lo: usize| strains[lo..lo + m].iter().sum::<f64>() / m as f64;
    let steps: Vec<usize> = match direction {
        ChangeDirection::Backward => (m..=n - m).collect(),
        ChangeDirection::Forward => (0..=n - 2 * m).collect(),
    };
    let mut run = 0usize;
    let mut first_hot = 0.0f64;
    let mut suppress_until = f64::NEG_INFINITY;
    for s in steps {
        let cur = mean(s);
        let adjacent = match direction {
            ChangeDirection::Backward => mean(s - m),
            ChangeDirection::Forward => mean(s + m),
        };
        let hot = adjacent > STRAIN_EPSILON && cur / adjacent > CHANGE_RATIO;
        if hot {
            if run == 0 {
                first_hot = s as f64 * w;
            }
            run += 1;
        } else {
            run = 0;
        }
        if run >= CHANGE_RUN_LENGTH {
            if first_hot >= suppress_until {
                flags.push(KeyChange { bar: sigs.bar_of(first_hot), beat: first_hot });
                suppress_until = first_hot + CHANGE_SPAN_BEATS;
            }
            run = 0;
        }
    }
    flags
}

/// Detects a local key for each segment between consecutive flags.
/// Segments without notes inherit the previous segment's key; the piece
/// key is the fallback for a silent opening segment.
pub fn segment_keys(
    spelled: &[SpelledNote],
    changes: &[KeyChange],
    params: &SpiralParams,
) -> Vec<SegmentKey> {
    let global = match detect_key(spelled, params) {
        Ok(est) => est,
        Err(_) => return Vec::new(),
    };
    let notes: Vec<crate::midi::Note> = spelled.iter().map(|s| s.note).collect();
    let class = spelling_class(estimate_key_index(&notes).expect("non-empty after detect_key"));
    let mut boundaries = vec![0.0f64];
    for c in changes {
        if c.beat > *boundaries.last().unwrap() {
            boundaries.push(c.beat);
        }
    }
    let mut segments = Vec::with_capacity(boundaries.len());
    let mut prev = global;
    for (i, &lo) in boundaries.iter().enumerate() {
        let hi = boundaries.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let seg: Vec<SpelledNote> = spelled
            .iter()
            .filter(|s| s.note.onset_beats >= lo && s.note.onset_beats < hi)
            .copied()
            .collect();
        let est = detect_key_in_class(&seg, params, class).unwrap_or(prev);
        segments.push(SegmentKey { start_beat: lo, estimate: est });
        prev = est;
    }
    segments
}

/// Recomputes tensile strain against each segment's local key, leaving
/// diameter, momentum, and the flags themselves untouched.
pub fn rekeyed_series(
    spelled: &[SpelledNote],
    series: &TensionSeries,
    sigs: &TimeSigMap,
    params: &SpiralParams,
) -> (TensionSeries, Vec<SegmentKey>) {
    let segments = segment_keys(spelled, &series.key_changes, params);
    if segments.is_empty() {
        return (series.clone(), segments);
    }
    let clouds = window_clouds(spelled, series.window_beats, piece_end(spelled), params);
    let mut out = series.clone();
    for (i, window) in out.windows.iter_mut().enumerate() {
        let seg = segments
            .iter()
            .rev()
            .find(|s| s.start_beat <= window.start_beat)
            .unwrap_or(&segments[0]);
        window.strain = tensile_strain(&clouds[i], seg.estimate.key, params);
    }
    out.per_bar = aggregate_per_bar(&out.windows, sigs);
    (out, segments)
}
