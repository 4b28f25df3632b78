//! Spiral-array geometry: pitch classes, chords, and keys as points on
//! nested helices, with centers of effect and Euclidean distances.
//!
//! The line-of-fifths index is the only pitch identity used here. One step
//! up the line of fifths rotates a quarter turn around the z axis and rises
//! by `h`, so C=0, G=1, D=2, ..., F=-1, Bb=-2.

use serde::Serialize;

use crate::error::SpiralError;

/// A point in tonal space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    fn scaled(self, c: f64) -> Self {
        Point3::new(self.x * c, self.y * c, self.z * c)
    }

    fn plus(self, other: Point3) -> Self {
        Point3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }
}

/// Major or minor quality, shared by chords and keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
        }
    }
}

/// A key named by the line-of-fifths index of its tonic plus a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct KeyId {
    pub fifth_index: i32,
    pub mode: Mode,
}

impl KeyId {
    pub const fn new(fifth_index: i32, mode: Mode) -> Self {
        KeyId { fifth_index, mode }
    }
}

/// Calibration of the helices and of the chord/key weighting schemes.
///
/// Defaults follow the standard published calibration: r = 1, h = sqrt(2/15),
/// all weight triples (0.536, 0.274, 0.19), alpha = beta = 0.75. Key weights
/// equal chord weights by default; both are independently overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpiralParams {
    /// Helix radius.
    pub r: f64,
    /// Vertical rise per fifth step.
    pub h: f64,
    /// Major-chord weights over (root, fifth, major third).
    pub w: [f64; 3],
    /// Minor-chord weights over (root, fifth, minor third).
    pub u: [f64; 3],
    /// Major-key weights over the I, V, IV chords.
    pub omega: [f64; 3],
    /// Minor-key weights over the i chord and the blended V and iv chords.
    pub nu: [f64; 3],
    /// Blend of major versus minor dominant chord in minor keys.
    pub alpha: f64,
    /// Blend of minor versus major subdominant chord in minor keys.
    pub beta: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        let w = [0.536, 0.274, 0.19];
        SpiralParams {
            r: 1.0,
            h: (2.0f64 / 15.0).sqrt(),
            w,
            u: w,
            omega: w,
            nu: w,
            alpha: 0.75,
            beta: 0.75,
        }
    }
}

impl SpiralParams {
    /// Checks positivity of r and h, positivity and unit sum of every weight
    /// triple, and that alpha and beta lie in [0, 1].
    pub fn validate(&self) -> Result<(), SpiralError> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(SpiralError::BadParams("r must be positive".into()));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SpiralError::BadParams("h must be positive".into()));
        }
        for (name, t) in [("w", self.w), ("u", self.u), ("omega", self.omega), ("nu", self.nu)] {
            if t.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(SpiralError::BadParams(format!("{name} weights must be positive")));
            }
            let sum: f64 = t.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(SpiralError::BadParams(format!(
                    "{name} weights must sum to 1 (got {sum})"
                )));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SpiralError::BadParams(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

// sin/cos of k*pi/2 for k = 0..3; exact values keep the quarter-turn
// symmetry free of trigonometric rounding.
const QUARTER_TURNS: [(f64, f64); 4] = [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)];

/// Position of a pitch class on the pitch helix:
/// P(k) = (r sin(k pi/2), r cos(k pi/2), k h).
pub fn pitch_position(fifth_index: i32, params: &SpiralParams) -> Point3 {
    let (s, c) = QUARTER_TURNS[fifth_index.rem_euclid(4) as usize];
    Point3::new(params.r * s, params.r * c, fifth_index as f64 * params.h)
}

fn combine3(weights: [f64; 3], points: [Point3; 3]) -> Point3 {
    points[0]
        .scaled(weights[0])
        .plus(points[1].scaled(weights[1]))
        .plus(points[2].scaled(weights[2]))
}

/// Center of a major or minor triad rooted at `root_fifth_index`.
///
/// Major: w1 P(k) + w2 P(k+1) + w3 P(k+4).
/// Minor: u1 P(k) + u2 P(k+1) + u3 P(k-3).
pub fn chord_center(root_fifth_index: i32, quality: Mode, params: &SpiralParams) -> Point3 {
    let k = root_fifth_index;
    match quality {
        Mode::Major => combine3(
            params.w,
            [
                pitch_position(k, params),
                pitch_position(k + 1, params),
                pitch_position(k + 4, params),
            ],
        ),
        Mode::Minor => combine3(
            params.u,
            [
                pitch_position(k, params),
                pitch_position(k + 1, params),
                pitch_position(k - 3, params),
            ],
        ),
    }
}

/// Center of a key.
///
/// Major key k: omega1 CM(k) + omega2 CM(k+1) + omega3 CM(k-1).
/// Minor key k: nu1 Cm(k) + nu2 [alpha CM(k+1) + (1-alpha) Cm(k+1)]
///            + nu3 [beta Cm(k-1) + (1-beta) CM(k-1)].
pub fn key_center(key: KeyId, params: &SpiralParams) -> Point3 {
    let k = key.fifth_index;
    match key.mode {
        Mode::Major => combine3(
            params.omega,
            [
                chord_center(k, Mode::Major, params),
                chord_center(k + 1, Mode::Major, params),
                chord_center(k - 1, Mode::Major, params),
            ],
        ),
        Mode::Minor => {
            let dominant = chord_center(k + 1, Mode::Major, params)
                .scaled(params.alpha)
                .plus(chord_center(k + 1, Mode::Minor, params).scaled(1.0 - params.alpha));
            let subdominant = chord_center(k - 1, Mode::Minor, params)
                .scaled(params.beta)
                .plus(chord_center(k - 1, Mode::Major, params).scaled(1.0 - params.beta));
            combine3(
                params.nu,
                [chord_center(k, Mode::Minor, params), dominant, subdominant],
            )
        }
    }
}

/// Weight-normalized mean of the points: sum(w_i p_i) / sum(w_i).
///
/// Invariant under uniform scaling of all weights.
pub fn center_of_effect(weighted: &[(Point3, f64)]) -> Result<Point3, SpiralError> {
    if weighted.is_empty() {
        return Err(SpiralError::EmptyCloud);
    }
    let mut acc = Point3::new(0.0, 0.0, 0.0);
    let mut total = 0.0;
    for (p, w) in weighted {
        acc = acc.plus(p.scaled(*w));
        total += w;
    }
    Ok(acc.scaled(1.0 / total))
}

/// Euclidean distance between two points of tonal space.
pub fn distance(a: Point3, b: Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn close(a: Point3, b: Point3) -> bool {
        distance(a, b) < TOL
    }

    #[test]
    fn pitch_position_origin_and_full_turn() {
        let p = SpiralParams::default();
        assert!(close(pitch_position(0, &p), Point3::new(0.0, 1.0, 0.0)));
        assert!(close(pitch_position(4, &p), Point3::new(0.0, 1.0, 4.0 * p.h)));
    }

    #[test]
    fn fifth_step_distance_is_constant() {
        let p = SpiralParams::default();
        let expect = (2.0 * p.r * p.r + p.h * p.h).sqrt();
        for k in -12..=12 {
            let d = distance(pitch_position(k, &p), pitch_position(k + 1, &p));
            assert!((d - expect).abs() < 1e-9, "k={k}: {d} vs {expect}");
        }
    }

    #[test]
    fn degenerate_chord_weights_collapse_to_root() {
        let mut p = SpiralParams::default();
        p.w = [1.0, 0.0, 0.0];
        assert!(close(chord_center(0, Mode::Major, &p), pitch_position(0, &p)));
    }

    #[test]
    fn chord_centers_match_direct_combination() {
        let p = SpiralParams::default();
        let cm = combine3(
            p.w,
            [pitch_position(0, &p), pitch_position(1, &p), pitch_position(4, &p)],
        );
        assert!(close(chord_center(0, Mode::Major, &p), cm));
        let am = combine3(
            p.u,
            [pitch_position(3, &p), pitch_position(4, &p), pitch_position(0, &p)],
        );
        assert!(close(chord_center(3, Mode::Minor, &p), am));
    }

    #[test]
    fn key_centers_pinned_regression_values() {
        // Direct evaluations recorded once from the closed-form combination.
        let p = SpiralParams::default();
        let cmaj = key_center(KeyId::new(0, Mode::Major), &p);
        assert!(close(
            cmaj,
            Point3::new(0.20784800000000003, 0.36612, 0.4082358795271838)
        ));
        let cmin = key_center(KeyId::new(0, Mode::Minor), &p);
        assert!(close(
            cmin,
            Point3::new(0.32374800000000004, 0.27834000000000003, 0.04545732078921208)
        ));
    }

    #[test]
    fn rotational_covariance_of_key_centers() {
        // Transposing by one fifth rotates a quarter turn and rises by h.
        let p = SpiralParams::default();
        for mode in [Mode::Major, Mode::Minor] {
            for k in -8..=8 {
                let a = key_center(KeyId::new(k, mode), &p);
                let b = key_center(KeyId::new(k + 1, mode), &p);
                let rotated = Point3::new(a.y, -a.x, a.z + p.h);
                assert!(distance(b, rotated) < 1e-9, "mode {mode:?} k {k}");
            }
        }
    }

    #[test]
    fn center_of_effect_basics() {
        let p = SpiralParams::default();
        let a = pitch_position(0, &p);
        let b = pitch_position(4, &p);
        let single = center_of_effect(&[(a, 2.5)]).unwrap();
        assert!(close(single, a));
        let mid = center_of_effect(&[(a, 1.0), (b, 1.0)]).unwrap();
        assert!(close(mid, a.scaled(0.5).plus(b.scaled(0.5))));
        let skew = center_of_effect(&[(a, 1.0), (b, 3.0)]).unwrap();
        assert!(close(skew, a.scaled(0.25).plus(b.scaled(0.75))));
        assert!(matches!(center_of_effect(&[]), Err(SpiralError::EmptyCloud)));
    }

    #[test]
    fn validate_rejects_bad_weights() {
        let mut p = SpiralParams::default();
        p.w = [0.5, 0.3, 0.3];
        assert!(p.validate().is_err());
        p = SpiralParams::default();
        p.alpha = 1.5;
        assert!(p.validate().is_err());
        assert!(SpiralParams::default().validate().is_ok());
    }
}
