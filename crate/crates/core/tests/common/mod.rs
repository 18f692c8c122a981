#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use auxgeo::attn::Strategy;
use auxgeo::corpus::load_problem;
use auxgeo::features::FeatureVector;
use auxgeo::problem::Problem;
use auxgeo::scene::{Label, Scene, Segment};
use auxgeo::scorer::{Contribution, Prediction};
use auxgeo::search::{NodeStats, StateSig, StatsStore};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn example1() -> Problem {
    load_problem(&fixture("example1.json")).expect("fixture loads")
}

/// Visit statistics and verdicts of the worked example, keyed by our
/// canonical strategy names. The published table numbers the four joins
/// CE, BD, PE, ED; our generator lists them in label order.
pub const TABLE2: [(&str, u64, u64, u8); 7] = [
    ("connect(C,E)", 235518, 236152, 0),
    ("connect(B,D)", 235518, 236152, 0),
    ("connect(E,P)", 235518, 236152, 0),
    ("connect(D,E)", 235518, 236152, 1),
    ("parallelogram(P;A,B)->G", 99, 236152, 1),
    ("midpoint(B,P)->F", 322, 236152, 1),
    ("project(C;A,B,P)->G", 213, 236152, 1),
];

/// Returns the tabulated verdict for known strategies, 0 otherwise.
pub struct TableJudge(pub BTreeMap<String, u8>);

impl TableJudge {
    pub fn table2() -> Self {
        TableJudge(TABLE2.iter().map(|(s, _, _, f)| (s.to_string(), *f)).collect())
    }
}

impl Contribution for TableJudge {
    fn contribution(&self, s: &Strategy, _: &FeatureVector, _: &FeatureVector) -> Prediction {
        let f = self.0.get(&s.canonical()).copied().unwrap_or(0);
        Prediction::from_probability(f64::from(f))
    }
}

pub fn primed_store(sigs: &[StateSig]) -> StatsStore {
    let mut store = StatsStore::new();
    for sig in sigs {
        for (s, w, n, _) in TABLE2 {
            store.set(*sig, s, NodeStats::new(w, n)).unwrap();
        }
    }
    store
}

/// Random 2D or 3D scene with `n` points in general position and a random
/// subset of segments.
pub fn random_scene(rng: &mut impl Rng, n: usize, dim: u8, density: f64) -> Scene {
    let mut b = Scene::builder(dim);
    for i in 0..n {
        let coords: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        b = b.point(label(i), &coords);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                b = b.segment(Segment::new(label(i), label(j)));
            }
        }
    }
    b.build().expect("random points are distinct")
}

pub fn label(i: usize) -> Label {
    Label(((b'A' + i as u8) as char).to_string())
}

fn coords(s: &Scene, l: &Label) -> [f64; 3] {
    s.point(l).unwrap().pos.0
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn len(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn angle_between(u: [f64; 3], v: [f64; 3]) -> f64 {
    let c = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (len(u) * len(v));
    c.clamp(-1.0, 1.0).acos()
}

fn close(a: f64, b: f64, beta: f64) -> bool {
    let m = a.abs().max(b.abs());
    m == 0.0 || (a - b).abs() <= beta * m
}

/// Direct pair enumeration over raw coordinates.
pub fn oracle_features(s: &Scene, beta: f64) -> [u64; 6] {
    let segs: Vec<(Label, Label)> = s.segments().iter().map(|g| (g.a().clone(), g.b().clone())).collect();
    let vec_of = |g: &(Label, Label)| sub(coords(s, &g.1), coords(s, &g.0));
    let mut out = [0u64; 6];
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (u, v) = (vec_of(&segs[i]), vec_of(&segs[j]));
            if close(len(u), len(v), beta) {
                out[0] += 1;
            }
            let theta = angle_between(u, v);
            if theta / PI <= beta || 1.0 - theta / PI <= beta {
                out[2] += 1;
            }
            let folded = theta.min(PI - theta);
            if (PI / 2.0 - folded).abs() / (PI / 2.0) <= beta {
                out[3] += 1;
            }
        }
    }
    // Angles: every unordered pair of segments meeting at a shared endpoint.
    let mut angles = Vec::new();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (a, b) = (&segs[i], &segs[j]);
            let shared = [&a.0, &a.1].into_iter().find(|x| *x == &b.0 || *x == &b.1);
            if let Some(v) = shared {
                let p = if &a.0 == v { &a.1 } else { &a.0 };
                let q = if &b.0 == v { &b.1 } else { &b.0 };
                angles.push(angle_between(sub(coords(s, p), coords(s, v)), sub(coords(s, q), coords(s, v))));
            }
        }
    }
    for i in 0..angles.len() {
        for j in i + 1..angles.len() {
            if (angles[i] - angles[j]).abs() <= 1e-9 || close(angles[i], angles[j], beta) {
                out[1] += 1;
            }
        }
    }
    let labels: Vec<Label> = s.labels().cloned().collect();
    let joined = |a: &Label, b: &Label| s.has_segment(&Segment::new(a.clone(), b.clone()));
    let mut tris: Vec<[f64; 3]> = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            for k in j + 1..labels.len() {
                let (a, b, c) = (&labels[i], &labels[j], &labels[k]);
                if joined(a, b) && joined(b, c) && joined(a, c) {
                    let mut sides = [
                        len(sub(coords(s, a), coords(s, b))),
                        len(sub(coords(s, b), coords(s, c))),
                        len(sub(coords(s, a), coords(s, c))),
                    ];
                    sides.sort_by(f64::total_cmp);
                    tris.push(sides);
                }
            }
        }
    }
    for i in 0..tris.len() {
        for j in i + 1..tris.len() {
            let (x, y) = (tris[i], tris[j]);
            if (0..3).all(|k| close(x[k], y[k], beta)) {
                out[4] += 1;
            }
            let r = [y[0] / x[0], y[1] / x[1], y[2] / x[2]];
            if close(r[0], r[1], beta) && close(r[0], r[2], beta) && close(r[1], r[2], beta) {
                out[5] += 1;
            }
        }
    }
    out
}

/// Index of the largest `w/n + c·√(ln N / n)`, unvisited first, earliest on ties.
pub fn oracle_uct(stats: &[(u64, u64)], c: f64) -> usize {
    if let Some(i) = stats.iter().position(|s| s.1 == 0) {
        return i;
    }
    let total: u64 = stats.iter().map(|s| s.1).sum();
    let score = |s: &(u64, u64)| s.0 as f64 / s.1 as f64 + c * ((total as f64).ln() / s.1 as f64).sqrt();
    let mut best = 0;
    for i in 1..stats.len() {
        if score(&stats[i]) > score(&stats[best]) {
            best = i;
        }
    }
    best
}

pub fn feature(v: FeatureVector) -> [u64; 6] {
    v.0
}
