//! Train/test splitting and per-role precision/recall/F1 reporting.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{LabeledTrack, Role};

/// Splits by song so tracks of one song never straddle the boundary;
/// songs are homogeneous (one track per role), which keeps the class
/// balance of both halves. Returns (train, test) index lists.
pub fn split_by_song(
    data: &[LabeledTrack],
    test_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut files: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for t in data {
        if seen.insert(t.file_id.as_str()) {
            files.push(t.file_id.as_str());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..files.len()).rev() {
        let j = rng.gen_range(0..=i);
        files.swap(i, j);
    }
    let n_test = ((files.len() as f64) * test_fraction).round() as usize;
    let test_files: BTreeSet<&str> = files.iter().take(n_test).copied().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, t) in data.iter().enumerate() {
        if test_files.contains(t.file_id.as_str()) {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

/// Metrics of one (role, class) row. `positive_class` true means the row
/// scores detection of the role, false scores detection of its absence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalRow {
    pub role: Role,
    pub positive_class: bool,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Two rows per role, diagnosing both the role and its complement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Builds both class rows for one role from prediction/label pairs.
pub fn evaluate_role(role: Role, predictions: &[bool], labels: &[bool]) -> [EvalRow; 2] {
    assert_eq!(predictions.len(), labels.len());
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut tn = 0.0;
    let mut fnn = 0.0;
    for (p, l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fnn += 1.0,
        }
    }
    let row = |positive: bool| -> EvalRow {
        let (t, f_wrong, missed, support) = if positive {
            (tp, fp, fnn, (tp + fnn) as usize)
        } else {
            (tn, fnn, fp, (tn + fp) as usize)
        };
        let precision = safe_div(t, t + f_wrong);
        let recall = safe_div(t, t + missed);
        let f1 = safe_div(2.0 * precision * recall, precision + recall);
        EvalRow { role, positive_class: positive, precision, recall, f1, support }
    };
    [row(true), row(false)]
}

impl fmt::Display for EvalTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10}{:<8}{:>11}{:>9}{:>9}{:>10}", "role", "class", "precision", "recall", "f1", "support")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10}{:<8}{:>11.3}{:>9.3}{:>9.3}{:>10}",
                r.role.as_str(),
                if r.positive_class { "True" } else { "False" },
                r.precision,
                r.recall,
                r.f1,
                r.support
            )?;
        }
        Ok(())
    }
}

/// Parses a label file: one `file_id<TAB>track_index<TAB>role` per line;
/// blank lines and `#` comments are skipped.
pub fn parse_label_file(text: &str) -> Result<Vec<(String, usize, Role)>, String> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(format!("line {}: expected 3 tab-separated fields", ln + 1));
        }
        let index: usize = parts[1]
            .parse()
            .map_err(|_| format!("line {}: bad track index {:?}", ln + 1, parts[1]))?;
        let role = Role::from_name(parts[2])
            .ok_or_else(|| format!("line {}: unknown role {:?}", ln + 1, parts[2]))?;
        out.push((parts[0].to_string(), index, role));
    }
    Ok(out)
}
