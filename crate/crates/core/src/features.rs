//! Six tolerance-based pair counts fingerprinting a scene.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scene::{Scene, Segment, Tri};

pub const DEFAULT_BETA: f64 = 0.13;

/// Absolute floor under which two angles count as equal regardless of the
/// relative test (both near zero).
const ANGLE_FLOOR: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("beta must lie in (0, 1), got {0}")]
pub struct BetaOutOfRange(pub f64);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub beta: f64,
}

impl TolerancePolicy {
    pub fn new(beta: f64) -> Result<Self, BetaOutOfRange> {
        if beta > 0.0 && beta < 1.0 {
            Ok(TolerancePolicy { beta })
        } else {
            Err(BetaOutOfRange(beta))
        }
    }
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy { beta: DEFAULT_BETA }
    }
}

/// Counts of equal-segment, equal-angle, parallel, perpendicular, congruent
/// and similar pairs, in that order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [u64; 6]);

impl FeatureVector {
    pub fn as_f64(&self) -> [f64; 6] {
        self.0.map(|v| v as f64)
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.0;
        write!(f, "({}, {}, {}, {}, {}, {})", v[0], v[1], v[2], v[3], v[4], v[5])
    }
}

fn rel_close(a: f64, b: f64, beta: f64) -> bool {
    let m = a.abs().max(b.abs());
    m == 0.0 || (a - b).abs() / m <= beta
}

/// Lengths agree within `beta` relative to the longer one.
pub fn seg_equal(len_i: f64, len_j: f64, beta: f64) -> bool {
    rel_close(len_i, len_j, beta)
}

/// Angles agree within `beta` relative to the larger one.
pub fn angle_equal(theta_1: f64, theta_2: f64, beta: f64) -> bool {
    (theta_1 - theta_2).abs() <= ANGLE_FLOOR || rel_close(theta_1, theta_2, beta)
}

/// `theta` is the angle between canonical directions in `[0, π]`; both
/// anti-parallel and co-directed lines pass.
pub fn parallel_test(theta: f64, beta: f64) -> bool {
    1.0 - theta / PI <= beta || theta / PI <= beta
}

pub fn perp_test(theta: f64, beta: f64) -> bool {
    let t = if theta > FRAC_PI_2 { PI - theta } else { theta };
    (FRAC_PI_2 - t).abs() / FRAC_PI_2.max(t) <= beta
}

/// Sorted side lengths agree pairwise under [`seg_equal`].
pub fn congruent_test(sides_1: [f64; 3], sides_2: [f64; 3], beta: f64) -> bool {
    let (a, b) = (sorted(sides_1), sorted(sides_2));
    (0..3).all(|k| seg_equal(a[k], b[k], beta))
}

/// Ratios of sorted side lengths agree pairwise within `beta`.
pub fn similar_test(sides_1: [f64; 3], sides_2: [f64; 3], beta: f64) -> bool {
    let (a, b) = (sorted(sides_1), sorted(sides_2));
    let r = [b[0] / a[0], b[1] / a[1], b[2] / a[2]];
    rel_close(r[0], r[1], beta) && rel_close(r[0], r[2], beta) && rel_close(r[1], r[2], beta)
}

fn sorted(mut s: [f64; 3]) -> [f64; 3] {
    s.sort_by(f64::total_cmp);
    s
}

pub fn triangle_sides(scene: &Scene, t: &Tri) -> [f64; 3] {
    let [a, b, c] = t.vertices();
    let len = |x: &crate::scene::Label, y: &crate::scene::Label| {
        scene.segment_length(&Segment::new(x.clone(), y.clone())).expect("triangle vertices exist")
    };
    [len(a, b), len(b, c), len(a, c)]
}

fn count_pairs<T>(items: &[T], test: impl Fn(&T, &T) -> bool) -> u64 {
    let mut n = 0;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            n += u64::from(test(&items[i], &items[j]));
        }
    }
    n
}

/// Unordered pair counts over segments, enumerated angles and triangles.
pub fn feature_vector(scene: &Scene, beta: f64) -> FeatureVector {
    let segs: Vec<(f64, crate::geom::Vec3)> = scene
        .segments()
        .iter()
        .map(|s| {
            (scene.segment_length(s).expect("segment endpoints exist"), scene.direction(s).expect("nondegenerate"))
        })
        .collect();
    let angles: Vec<f64> =
        scene.enumerate_angles().iter().map(|a| scene.angle(a).expect("enumerated angles are valid")).collect();
    let tris: Vec<[f64; 3]> = scene.triangles().iter().map(|t| triangle_sides(scene, t)).collect();
    let between = |u: &crate::geom::Vec3, v: &crate::geom::Vec3| crate::geom::vector_angle(*u, *v);
    FeatureVector([
        count_pairs(&segs, |a, b| seg_equal(a.0, b.0, beta)),
        count_pairs(&angles, |a, b| angle_equal(*a, *b, beta)),
        count_pairs(&segs, |a, b| parallel_test(between(&a.1, &b.1), beta)),
        count_pairs(&segs, |a, b| perp_test(between(&a.1, &b.1), beta)),
        count_pairs(&tris, |a, b| congruent_test(*a, *b, beta)),
        count_pairs(&tris, |a, b| similar_test(*a, *b, beta)),
    ])
}
