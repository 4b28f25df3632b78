//! Analysis outputs: versioned JSON report, per-window CSV, and a
//! self-contained SVG strain plot.

use serde::Serialize;

use crate::midi::{Diagnostics, TimeSigMap};
use crate::spiral::Mode;
use crate::tension::{SegmentKey, TensionSeries};
use crate::tonal::KeyEstimate;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyReport {
    pub tonic_name: String,
    pub mode: Mode,
    pub confidence: f64,
}

impl From<&KeyEstimate> for KeyReport {
    fn from(est: &KeyEstimate) -> Self {
        KeyReport { tonic_name: est.tonic_name(), mode: est.key.mode, confidence: est.confidence }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub start_beat: f64,
    pub key: KeyReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub dangling_note_offs: usize,
    pub unterminated_note_ons: usize,
    pub zero_length_dropped: usize,
    pub drum_notes_excluded: usize,
}

impl DiagnosticsReport {
    pub fn new(d: Diagnostics, drum_notes_excluded: usize) -> Self {
        DiagnosticsReport {
            dangling_note_offs: d.dangling_note_offs,
            unterminated_note_ons: d.unterminated_note_ons,
            zero_length_dropped: d.zero_length_dropped,
            drum_notes_excluded,
        }
    }
}

/// The full machine-readable result of one analysis run. Field order is
/// the JSON schema; identical inputs serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub input: String,
    pub key: KeyReport,
    pub tension: TensionSeries,
    pub segments: Option<Vec<SegmentReport>>,
    pub diagnostics: DiagnosticsReport,
}

impl AnalysisReport {
    pub fn new(
        input: String,
        key: &KeyEstimate,
        tension: TensionSeries,
        segments: Option<&[SegmentKey]>,
        diagnostics: DiagnosticsReport,
    ) -> Self {
        AnalysisReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            input,
            key: key.into(),
            tension,
            segments: segments.map(|s| {
                s.iter()
                    .map(|seg| SegmentReport {
                        start_beat: seg.start_beat,
                        key: (&seg.estimate).into(),
                    })
                    .collect()
            }),
            diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// One CSV row per window: start beat, bar, and the three measures.
pub fn tension_csv(series: &TensionSeries, sigs: &TimeSigMap) -> String {
    let mut out = String::from("window_start_beat,bar,diameter,momentum,strain\n");
    for w in &series.windows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            w.start_beat,
            sigs.bar_of(w.start_beat),
            w.diameter,
            w.momentum,
            w.strain
        ));
    }
    out
}

/// Line plot of per-bar tensile strain with key-change markers.
/// Self-contained SVG: no scripts, no external references.
pub fn strain_svg(series: &TensionSeries, width: u32, height: u32) -> String {
    let (width, height) = (width.max(160), height.max(120));
    let margin_l = 48.0;
    let margin_r = 16.0;
    let margin_t = 20.0;
    let margin_b = 36.0;
    let plot_w = width as f64 - margin_l - margin_r;
    let plot_h = height as f64 - margin_t - margin_b;

    let bars = &series.per_bar;
    let n = bars.len();
    let max_strain = bars.iter().map(|b| b.strain).fold(0.0f64, f64::max).max(1e-9);
    let y_top = (max_strain * 1.1).max(0.1);

    let x_of = |bar: usize| -> f64 {
        if n <= 1 {
            margin_l + plot_w / 2.0
        } else {
            margin_l + (bar as f64 - 1.0) / (n as f64 - 1.0) * plot_w
        }
    };
    let y_of = |v: f64| -> f64 { margin_t + (1.0 - v / y_top) * plot_h };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        margin_l,
        margin_t + plot_h,
        margin_l + plot_w,
        margin_t + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        margin_l, margin_t, margin_l, margin_t + plot_h
    ));
    // Bar-axis ticks, at most ten of them.
    if n > 0 {
        let step = (n / 10).max(1);
        let mut bar = 1;
        while bar <= n {
            let x = x_of(bar);
            svg.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
                margin_t + plot_h,
                margin_t + plot_h + 4.0
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{bar}</text>\n",
                margin_t + plot_h + 16.0
            ));
            bar += step;
        }
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">bar</text>\n",
        margin_l + plot_w / 2.0,
        margin_t + plot_h + 30.0
    ));
    // Strain-axis ticks at 0, half, and top.
    for frac in [0.0, 0.5, 1.0] {
        let v = y_top * frac;
        let y = y_of(v);
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"black\"/>\n",
            margin_l - 4.0,
            margin_l
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{v:.2}</text>\n",
            margin_l - 6.0,
            y + 3.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"12\" y=\"{:.1}\" font-size=\"10\" transform=\"rotate(-90 12 {:.1})\" \
         text-anchor=\"middle\">tensile strain</text>\n",
        margin_t + plot_h / 2.0,
        margin_t + plot_h / 2.0
    ));
    // Key-change markers behind the curve.
    for change in &series.key_changes {
        if change.bar >= 1 && change.bar <= n.max(1) {
            let x = x_of(change.bar);
            svg.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"red\" \
                 stroke-dasharray=\"4 3\"/>\n",
                margin_t,
                margin_t + plot_h
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" fill=\"red\">key change (bar {})</text>\n",
                x + 4.0,
                margin_t + 10.0,
                change.bar
            ));
        }
    }
    // The strain curve itself.
    if n > 0 {
        let points: Vec<String> = bars
            .iter()
            .map(|b| format!("{:.2},{:.2}", x_of(b.bar), y_of(b.strain)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spiral::{KeyId, SpiralParams};
    use crate::tension::compute_tension;
    use crate::tonal::{spell_notes, SpellingClass};

    fn sample_series() -> (TensionSeries, TimeSigMap) {
        let sigs = TimeSigMap::default();
        let params = SpiralParams::default();
        let notes: Vec<crate::midi::Note> = (0..32)
            .map(|i| crate::midi::Note {
                onset_beats: i as f64,
                duration_beats: 1.0,
                pitch: 60 + (i % 5) as u8,
                velocity: 80,
                track: 0,
                channel: 0,
            })
            .collect();
        let spelled = spell_notes(&notes, SpellingClass::Sharps);
        let key = KeyId { fifth_index: 0, mode: Mode::Major };
        (compute_tension(&spelled, key, 2.0, &sigs, &params), sigs)
    }

    fn sample_key() -> KeyEstimate {
        KeyEstimate { key: KeyId { fifth_index: 0, mode: Mode::Major }, confidence: 0.2 }
    }

    #[test]
    fn json_report_is_schema_versioned_and_stable() {
        let (series, _) = sample_series();
        let d = DiagnosticsReport::new(Diagnostics::default(), 3);
        let report = AnalysisReport::new("x.mid".into(), &sample_key(), series.clone(), None, d);
        let json = report.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["schema_version"], 1);
        assert_eq!(value["key"]["tonic_name"], "C");
        assert_eq!(value["diagnostics"]["drum_notes_excluded"], 3);
        assert_eq!(
            value["tension"]["per_bar"].as_array().unwrap().len(),
            series.per_bar.len()
        );
        let again = AnalysisReport::new("x.mid".into(), &sample_key(), series, None,
            DiagnosticsReport::new(Diagnostics::default(), 3));
        assert_eq!(json, again.to_json());
    }

    #[test]
    fn csv_has_header_and_one_row_per_window() {
        let (series, sigs) = sample_series();
        let csv = tension_csv(&series, &sigs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "window_start_beat,bar,diameter,momentum,strain");
        assert_eq!(lines.len(), series.windows.len() + 1);
        assert!(lines[1].starts_with("0,1,"));
    }

    #[test]
    fn svg_is_self_contained_and_marks_changes() {
        let (mut series, _) = sample_series();
        series.key_changes = vec![crate::tension::KeyChange { bar: 3, beat: 8.0 }];
        let svg = strain_svg(&series, 640, 320);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("key change (bar 3)"));
        assert!(svg.contains("tensile strain"));
        // Only the SVG namespace URI may mention a host; no loads.
        assert!(!svg.contains("href"));
        assert!(!svg.contains("<script"));
        assert_eq!(svg.matches("http").count(), 1);
    }

    #[test]
    fn svg_copes_with_degenerate_series() {
        let empty = TensionSeries {
            window_beats: 2.0,
            windows: vec![],
            per_bar: vec![],
            key_changes: vec![],
        };
        let svg = strain_svg(&empty, 10, 10);
        assert!(svg.contains("</svg>"));
    }
}
