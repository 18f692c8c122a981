//! Conclusion-relevance levels, correlation scores and subgraph extraction.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scene::{Circle, CircleDef, Conclusion, Label, PlaneRef, Scene};

/// Default pruning threshold.
pub const DEFAULT_ALPHA: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Finite(u32),
    Unreachable,
}

impl Level {
    /// `1/level`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Level::Finite(k) => 1.0 / k as f64,
            Level::Unreachable => 0.0,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(k) => write!(f, "{k}"),
            Level::Unreachable => f.write_str("∞"),
        }
    }
}

/// Which related points feed the averaged term of the correlation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    /// Only related points one level further from the conclusion. A point
    /// is kept when it leads somewhere beyond itself.
    #[default]
    Outward,
    /// Every related point regardless of level.
    AllRelated,
}

/// Symmetric relation graph: two points are related when they share a
/// segment or appear together in a scene fact.
pub fn relations(scene: &Scene) -> BTreeMap<Label, BTreeSet<Label>> {
    let mut g: BTreeMap<Label, BTreeSet<Label>> = scene.labels().map(|l| (l.clone(), BTreeSet::new())).collect();
    let mut link = |a: &Label, b: &Label| {
        if a != b {
            g.get_mut(a).expect("known").insert(b.clone());
            g.get_mut(b).expect("known").insert(a.clone());
        }
    };
    for s in scene.segments() {
        link(s.a(), s.b());
    }
    for (f, _) in scene.facts() {
        let ls: Vec<Label> = f.labels().into_iter().collect();
        for i in 0..ls.len() {
            for j in i + 1..ls.len() {
                link(&ls[i], &ls[j]);
            }
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelMap(BTreeMap<Label, Level>);

impl LevelMap {
    pub fn get(&self, l: &Label) -> Level {
        self.0.get(l).copied().unwrap_or(Level::Unreachable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, Level)> {
        self.0.iter().map(|(l, v)| (l, *v))
    }
}

/// Breadth-first hop distance plus one from the conclusion points.
pub fn compute_levels(scene: &Scene, conc: &Conclusion) -> LevelMap {
    levels_with(scene, &relations(scene), &conc.points(scene))
}

fn levels_with(scene: &Scene, g: &BTreeMap<Label, BTreeSet<Label>>, sources: &BTreeSet<Label>) -> LevelMap {
    let mut out: BTreeMap<Label, Level> = scene.labels().map(|l| (l.clone(), Level::Unreachable)).collect();
    let mut queue = VecDeque::new();
    for s in sources {
        if let Some(v) = out.get_mut(s) {
            *v = Level::Finite(1);
            queue.push_back((s.clone(), 1u32));
        }
    }
    while let Some((p, k)) = queue.pop_front() {
        for q in &g[&p] {
            let slot = out.get_mut(q).expect("known");
            if *slot == Level::Unreachable {
                *slot = Level::Finite(k + 1);
                queue.push_back((q.clone(), k + 1));
            }
        }
    }
    LevelMap(out)
}

/// `1/level(p)` plus the mean of `1/level` over the related points; an empty
/// related set contributes zero.
pub fn correlation(level: Level, related: &[Level]) -> f64 {
    let own = level.reciprocal();
    if related.is_empty() {
        return own;
    }
    own + related.iter().map(|l| l.reciprocal()).sum::<f64>() / related.len() as f64
}

/// 1 when `r ≥ alpha`.
pub fn point_sign(r: f64, alpha: f64) -> u8 {
    u8::from(r >= alpha)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointRelevance {
    pub label: Label,
    pub level: Level,
    pub correlation: f64,
    pub sign: u8,
    pub conclusion: bool,
}

/// Level, correlation and sign for every point, in label order.
pub fn analyze(scene: &Scene, conc: &Conclusion, alpha: f64, mode: Relevance) -> Vec<PointRelevance> {
    let g = relations(scene);
    let sources = conc.points(scene);
    let levels = levels_with(scene, &g, &sources);
    scene
        .labels()
        .map(|p| {
            let level = levels.get(p);
            let related: Vec<Level> = g[p]
                .iter()
                .map(|q| levels.get(q))
                .filter(|lq| match mode {
                    Relevance::AllRelated => true,
                    Relevance::Outward => match (level, *lq) {
                        (Level::Finite(a), Level::Finite(b)) => b > a,
                        _ => false,
                    },
                })
                .collect();
            let r = correlation(level, &related);
            PointRelevance {
                label: p.clone(),
                level,
                correlation: r,
                sign: point_sign(r, alpha),
                conclusion: sources.contains(p),
            }
        })
        .collect()
}

/// The scene restricted to points with sign 1 and to the conclusion points.
///
/// Segments, facts and circles survive when all their points do. A plane
/// survives, restricted to its remaining points, while those still span it.
/// Removed labels stay reserved so new points never reuse them.
pub fn subgraph(scene: &Scene, conc: &Conclusion, alpha: f64) -> Scene {
    subgraph_with(scene, conc, alpha, Relevance::default())
}

pub fn subgraph_with(scene: &Scene, conc: &Conclusion, alpha: f64, mode: Relevance) -> Scene {
    let keep: BTreeSet<Label> = analyze(scene, conc, alpha, mode)
        .into_iter()
        .filter(|p| p.sign == 1 || p.conclusion)
        .map(|p| p.label)
        .collect();
    restrict(scene, &keep)
}

/// The scene restricted to the `keep` labels.
pub fn restrict(scene: &Scene, keep: &BTreeSet<Label>) -> Scene {
    if scene.labels().all(|l| keep.contains(l)) {
        return scene.clone();
    }
    let mut b = Scene::builder(scene.dimension());
    for p in scene.points().iter().filter(|p| keep.contains(&p.label)) {
        b.add_point(p.label.clone(), p.pos, p.origin);
    }
    for l in scene.labels().filter(|l| !keep.contains(*l)).chain(scene.reserved()) {
        b.reserve(l.clone());
    }
    for s in scene.segments().iter().filter(|s| keep.contains(s.a()) && keep.contains(s.b())) {
        b.add_segment(s.clone());
    }
    let mut kept_circles = BTreeSet::new();
    for c in scene.circles() {
        if circle_points(c).iter().all(|l| keep.contains(*l)) {
            kept_circles.insert(c.name.clone());
            b.add_circle(c.clone());
        }
    }
    for p in scene.planes() {
        let rest = PlaneRef::new(p.labels().iter().filter(|l| keep.contains(*l)).cloned());
        if rest.labels().len() >= 3 && scene.plane_frame(&rest).is_some() {
            b.add_plane(rest);
        }
    }
    for (f, prov) in scene.facts() {
        let circle_ok = match f {
            crate::scene::Fact::OnCircle(_, c) => kept_circles.contains(c),
            _ => true,
        };
        if circle_ok && f.labels().iter().all(|l| keep.contains(l)) {
            b.add_fact(f.clone(), prov.clone());
        }
    }
    b.build().expect("a restriction of a valid scene is valid")
}

fn circle_points(c: &Circle) -> Vec<&Label> {
    match &c.def {
        CircleDef::Center { center, .. } => vec![center],
        CircleDef::Diameter { ends } => vec![ends.a(), ends.b()],
    }
}
