//! Auxiliary-construction strategies: enumeration and application.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{self, Vec3};
use crate::scene::{Conclusion, Fact, Label, Origin, PlaneRef, Provenance, Scene, SceneError, Segment};

/// Margin, as a fraction of segment length, keeping constructed points off
/// segment endpoints.
const END_MARGIN: f64 = 1e-6;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("construction {strategy} rejected: {reason}")]
    Rejected { strategy: String, reason: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategyKind {
    /// Join two points.
    Connect { a: Label, b: Label },
    /// Point `new` at the midpoint of `segment`.
    Midpoint { segment: Segment, new: Label },
    /// Point `new` where the extensions of two segments meet.
    ExtendToIntersect { first: Segment, second: Segment, new: Label },
    /// Foot `new` of the perpendicular from `from` onto `onto`.
    PerpFoot { from: Label, onto: Segment, new: Label },
    /// Orthogonal projection `new` of `from` onto `plane`.
    Projection { from: Label, plane: PlaneRef, new: Label },
    /// Doubles the median from `apex` through `mid`, the midpoint of `side`,
    /// to `new`, closing a parallelogram on `side`.
    ParallelogramComplete { apex: Label, side: Segment, mid: Label, new: Label },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    /// 1-based position in generation order.
    pub code: usize,
    pub kind: StrategyKind,
}

fn pair(s: &Segment) -> String {
    format!("{},{}", s.a(), s.b())
}

impl StrategyKind {
    /// Stable, space-free identifier used as a statistics key.
    pub fn canonical(&self) -> String {
        match self {
            StrategyKind::Connect { a, b } => format!("connect({a},{b})"),
            StrategyKind::Midpoint { segment, new } => format!("midpoint({})->{new}", pair(segment)),
            StrategyKind::ExtendToIntersect { first, second, new } => {
                format!("extend({};{})->{new}", pair(first), pair(second))
            }
            StrategyKind::PerpFoot { from, onto, new } => format!("foot({from};{})->{new}", pair(onto)),
            StrategyKind::Projection { from, plane, new } => {
                let ls: Vec<&str> = plane.labels().iter().map(Label::as_str).collect();
                format!("project({from};{})->{new}", ls.join(","))
            }
            StrategyKind::ParallelogramComplete { apex, side, new, .. } => {
                format!("parallelogram({apex};{})->{new}", pair(side))
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StrategyKind::Connect { .. } => "connect",
            StrategyKind::Midpoint { .. } => "midpoint",
            StrategyKind::ExtendToIntersect { .. } => "extend",
            StrategyKind::PerpFoot { .. } => "foot",
            StrategyKind::Projection { .. } => "projection",
            StrategyKind::ParallelogramComplete { .. } => "parallelogram",
        }
    }

    /// Existing points the construction depends on.
    pub fn args(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        match self {
            StrategyKind::Connect { a, b } => {
                out.insert(a.clone());
                out.insert(b.clone());
            }
            StrategyKind::Midpoint { segment, .. } => {
                out.extend([segment.a().clone(), segment.b().clone()]);
            }
            StrategyKind::ExtendToIntersect { first, second, .. } => {
                out.extend([first.a().clone(), first.b().clone(), second.a().clone(), second.b().clone()]);
            }
            StrategyKind::PerpFoot { from, onto, .. } => {
                out.extend([from.clone(), onto.a().clone(), onto.b().clone()]);
            }
            StrategyKind::Projection { from, plane, .. } => {
                out.insert(from.clone());
                out.extend(plane.labels().iter().cloned());
            }
            StrategyKind::ParallelogramComplete { apex, side, mid, .. } => {
                out.extend([apex.clone(), side.a().clone(), side.b().clone(), mid.clone()]);
            }
        }
        out
    }

    /// Label of the point the construction adds, if any.
    pub fn new_point(&self) -> Option<&Label> {
        match self {
            StrategyKind::Connect { .. } => None,
            StrategyKind::Midpoint { new, .. }
            | StrategyKind::ExtendToIntersect { new, .. }
            | StrategyKind::PerpFoot { new, .. }
            | StrategyKind::Projection { new, .. }
            | StrategyKind::ParallelogramComplete { new, .. } => Some(new),
        }
    }
}

impl Strategy {
    pub fn canonical(&self) -> String {
        self.kind.canonical()
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Connect { a, b } => write!(f, "Connect {a} and {b}"),
            StrategyKind::Midpoint { segment, new } => write!(f, "Take midpoint {new} of {segment}"),
            StrategyKind::ExtendToIntersect { first, second, new } => {
                write!(f, "Extend {first} and {second} to meet at {new}")
            }
            StrategyKind::PerpFoot { from, onto, new } => {
                write!(f, "Drop perpendicular from {from} to {onto}, foot {new}")
            }
            StrategyKind::Projection { from, plane, new } => write!(f, "Project {from} onto {plane} at {new}"),
            StrategyKind::ParallelogramComplete { apex, side, mid, new } => {
                write!(f, "Extend median {apex}{mid} to {new} with {apex}{mid} = {mid}{new} (parallelogram on {side})")
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

/// Label for a point to be created at `pos`: a pending goal label when the
/// point lands on that witness's line, else the first free capital letter.
fn fresh_label(scene: &Scene, conc: &Conclusion, pos: Vec3) -> Label {
    for w in &conc.witnesses {
        if scene.label_taken(&w.label) {
            continue;
        }
        if let (Ok(a), Ok(b)) = (scene.pos(w.on.a()), scene.pos(w.on.b())) {
            if scene.on_line(a, b, pos) {
                return w.label.clone();
            }
        }
    }
    first_free(scene, conc, |i| char::from(b'A' + i as u8).to_string(), 26)
        .unwrap_or_else(|| first_free(scene, conc, |i| format!("P{}", i + 1), usize::MAX).expect("labels"))
}

fn first_free(scene: &Scene, conc: &Conclusion, name: impl Fn(usize) -> String, limit: usize) -> Option<Label> {
    (0..limit).map(|i| Label(name(i))).find(|l| !scene.label_taken(l) && !conc.is_witness(l))
}

fn intersection_label(scene: &Scene, conc: &Conclusion) -> Label {
    first_free(scene, conc, |i| format!("X{}", i + 1), usize::MAX).expect("labels")
}

/// Lines the goal talks about whose endpoints already exist.
fn goal_lines(scene: &Scene, conc: &Conclusion) -> Vec<Segment> {
    let lines: Vec<&Segment> = match &conc.goal {
        Fact::Parallel(a, b) | Fact::Perpendicular(a, b) | Fact::EqualSegments(a, b) => vec![a, b],
        Fact::Midpoint(_, s) | Fact::InPlane(s, _) | Fact::ParallelToPlane(s, _) => vec![s],
        _ => Vec::new(),
    };
    lines.into_iter().filter(|s| scene.contains(s.a()) && scene.contains(s.b())).cloned().collect()
}

fn midpoint_of<'a>(scene: &'a Scene, s: &Segment) -> Option<&'a Label> {
    scene.facts().iter().find_map(|(f, _)| match f {
        Fact::Midpoint(m, t) if t == s => Some(m),
        _ => None,
    })
}

fn is_fresh_spot(scene: &Scene, pos: Vec3) -> bool {
    scene.coincides_with_existing(pos).is_none()
}

/// Every valid construction for the scene, in a fixed order: connections,
/// parallelogram completions, midpoints, projections, perpendicular feet,
/// then extensions. Codes are assigned 1, 2, … in that order.
///
/// Midpoints and parallelogram completions are proposed inside triangles that
/// contain a goal line and already carry a midpoint on another side.
/// Projections and feet start from conclusion points; extensions pair
/// segments that both touch a conclusion point.
pub fn generate_strategies(scene: &Scene, conc: &Conclusion) -> Vec<Strategy> {
    let mut kinds: Vec<StrategyKind> = Vec::new();
    let labels: Vec<&Label> = scene.labels().collect();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if !scene.has_segment(&Segment::new(labels[i].clone(), labels[j].clone())) {
                kinds.push(StrategyKind::Connect { a: labels[i].clone(), b: labels[j].clone() });
            }
        }
    }

    let mut parallelograms = Vec::new();
    let mut midpoints = Vec::new();
    let goal = goal_lines(scene, conc);
    for t in scene.triangles() {
        let [a, b, c] = t.vertices();
        let sides = [
            Segment::new(a.clone(), b.clone()),
            Segment::new(b.clone(), c.clone()),
            Segment::new(a.clone(), c.clone()),
        ];
        for g in goal.iter().filter(|g| sides.contains(g)) {
            let others: Vec<&Segment> = sides.iter().filter(|s| *s != g).collect();
            for (k, side) in others.iter().enumerate() {
                let Some(mid) = midpoint_of(scene, side) else { continue };
                let apex = t.vertices().iter().find(|v| !side.contains(v)).expect("triangle vertex");
                let (pa, pm) = (scene.pos(apex).unwrap(), scene.pos(mid).unwrap());
                let y = pm * 2.0 - pa;
                if is_fresh_spot(scene, y) {
                    parallelograms.push(StrategyKind::ParallelogramComplete {
                        apex: apex.clone(),
                        side: (*side).clone(),
                        mid: mid.clone(),
                        new: fresh_label(scene, conc, y),
                    });
                }
                let third = others[1 - k];
                if midpoint_of(scene, third).is_none() {
                    let m = scene.pos(third.a()).unwrap().midpoint(scene.pos(third.b()).unwrap());
                    if is_fresh_spot(scene, m) {
                        midpoints
                            .push(StrategyKind::Midpoint { segment: third.clone(), new: fresh_label(scene, conc, m) });
                    }
                }
            }
        }
    }
    push_unique(&mut kinds, parallelograms);
    push_unique(&mut kinds, midpoints);

    let focus = conc.points(scene);
    if scene.dimension() == 3 {
        let mut projections = Vec::new();
        for p in &focus {
            let x = scene.pos(p).unwrap();
            for plane in scene.planes() {
                if plane.contains(p) || scene.on_plane(plane, x) {
                    continue;
                }
                let (a, b, c) = scene.plane_frame(plane).expect("declared planes span");
                let foot = geom::project_to_plane(a, b, c, x);
                if is_fresh_spot(scene, foot) {
                    projections.push(StrategyKind::Projection {
                        from: p.clone(),
                        plane: plane.clone(),
                        new: fresh_label(scene, conc, foot),
                    });
                }
            }
        }
        push_unique(&mut kinds, projections);
    } else {
        let mut feet = Vec::new();
        for p in &focus {
            let x = scene.pos(p).unwrap();
            for s in scene.segments().iter().filter(|s| !s.contains(p)) {
                let (a, b) = (scene.pos(s.a()).unwrap(), scene.pos(s.b()).unwrap());
                if scene.on_line(a, b, x) {
                    continue;
                }
                let (foot, t) = geom::foot_on_line(a, b, x);
                if t > END_MARGIN && t < 1.0 - END_MARGIN && is_fresh_spot(scene, foot) {
                    feet.push(StrategyKind::PerpFoot {
                        from: p.clone(),
                        onto: s.clone(),
                        new: fresh_label(scene, conc, foot),
                    });
                }
            }
        }
        push_unique(&mut kinds, feet);
    }

    let touching: Vec<&Segment> =
        scene.segments().iter().filter(|s| focus.contains(s.a()) || focus.contains(s.b())).collect();
    let mut extensions = Vec::new();
    for i in 0..touching.len() {
        for j in i + 1..touching.len() {
            let (s, t) = (touching[i], touching[j]);
            if s.shares_endpoint(t) {
                continue;
            }
            let p = [s.a(), s.b(), t.a(), t.b()].map(|l| scene.pos(l).unwrap());
            let Some((x, u, v)) = geom::line_intersection(p[0], p[1], p[2], p[3]) else { continue };
            let outside = |w: f64| !(-END_MARGIN..=1.0 + END_MARGIN).contains(&w);
            if outside(u) && outside(v) && is_fresh_spot(scene, x) {
                extensions.push(StrategyKind::ExtendToIntersect {
                    first: s.clone(),
                    second: t.clone(),
                    new: intersection_label(scene, conc),
                });
            }
        }
    }
    push_unique(&mut kinds, extensions);

    kinds.into_iter().enumerate().map(|(i, kind)| Strategy { code: i + 1, kind }).collect()
}

fn push_unique(into: &mut Vec<StrategyKind>, items: Vec<StrategyKind>) {
    for k in items {
        if !into.contains(&k) {
            into.push(k);
        }
    }
}

fn reject(kind: &StrategyKind, reason: impl Into<String>) -> StrategyError {
    StrategyError::Rejected { strategy: kind.canonical(), reason: reason.into() }
}

/// Applies the construction to a copy of the scene.
///
/// Returns the extended scene and the facts the construction asserts, which
/// are also recorded in the new scene with construction provenance.
pub fn apply_strategy(scene: &Scene, s: &Strategy) -> Result<(Scene, Vec<Fact>), StrategyError> {
    let kind = &s.kind;
    for l in kind.args() {
        if !scene.contains(&l) {
            return Err(reject(kind, format!("unknown point {l}")));
        }
    }
    if let Some(new) = kind.new_point() {
        if scene.label_taken(new) {
            return Err(reject(kind, format!("label {new} already in use")));
        }
    }
    let pos = |l: &Label| scene.pos(l).expect("checked");
    let mut b = scene.to_builder();
    let mut facts = Vec::new();
    let add_point = |b: &mut crate::scene::SceneBuilder, l: &Label, x: Vec3| -> Result<(), StrategyError> {
        if let Some(o) = scene.coincides_with_existing(x) {
            return Err(reject(kind, format!("new point coincides with {o}")));
        }
        b.add_point(l.clone(), x, Origin::Auxiliary);
        Ok(())
    };
    let seg = |a: &Label, b: &Label| Segment::new(a.clone(), b.clone());
    match kind {
        StrategyKind::Connect { a, b: c } => {
            let s = seg(a, c);
            if scene.has_segment(&s) {
                return Err(reject(kind, "points already joined"));
            }
            b.add_segment(s.clone());
            let on = scene.points_on_line(&s)?;
            if on.len() >= 3 {
                facts.push(Fact::collinear(on));
            }
        }
        StrategyKind::Midpoint { segment, new } => {
            if midpoint_of(scene, segment).is_some() {
                return Err(reject(kind, "segment already has a midpoint"));
            }
            add_point(&mut b, new, pos(segment.a()).midpoint(pos(segment.b())))?;
            b.add_segment(seg(segment.a(), new));
            b.add_segment(seg(new, segment.b()));
            facts.push(Fact::midpoint(new.clone(), segment.clone()));
        }
        StrategyKind::PerpFoot { from, onto, new } => {
            let (a, c) = (pos(onto.a()), pos(onto.b()));
            if scene.on_line(a, c, pos(from)) {
                return Err(reject(kind, "point lies on the line"));
            }
            let (foot, _) = geom::foot_on_line(a, c, pos(from));
            add_point(&mut b, new, foot)?;
            b.add_segment(seg(from, new));
            for end in [onto.a(), onto.b()] {
                let e = seg(end, new);
                if !b.has_segment(&e) {
                    b.add_segment(e);
                }
            }
            facts.push(Fact::perpendicular(seg(from, new), onto.clone()));
            facts.push(Fact::collinear([onto.a().clone(), onto.b().clone(), new.clone()]));
        }
        StrategyKind::Projection { from, plane, new } => {
            let Some((a, c, d)) = scene.plane_frame(plane) else {
                return Err(reject(kind, "plane does not span"));
            };
            if scene.on_plane(plane, pos(from)) {
                return Err(reject(kind, "point lies on the plane"));
            }
            add_point(&mut b, new, geom::project_to_plane(a, c, d, pos(from)))?;
            b.add_segment(seg(from, new));
            let ls = plane.labels();
            for i in 0..ls.len() {
                for j in i + 1..ls.len() {
                    facts.push(Fact::perpendicular(seg(from, new), seg(&ls[i], &ls[j])));
                }
            }
        }
        StrategyKind::ParallelogramComplete { apex, side, mid, new } => {
            if midpoint_of(scene, side) != Some(mid) {
                return Err(reject(kind, format!("{mid} is not the midpoint of {side}")));
            }
            if side.contains(apex) || scene.collinear_labels(apex, side.a(), side.b())? {
                return Err(reject(kind, "apex is collinear with the side"));
            }
            let y = pos(mid) * 2.0 - pos(apex);
            add_point(&mut b, new, y)?;
            let median = seg(apex, mid);
            if !b.has_segment(&median) {
                b.add_segment(median);
            }
            b.add_segment(seg(mid, new));
            b.add_segment(seg(side.a(), new));
            b.add_segment(seg(side.b(), new));
            facts.push(Fact::midpoint(mid.clone(), seg(apex, new)));
        }
        StrategyKind::ExtendToIntersect { first, second, new } => {
            let p = [first.a(), first.b(), second.a(), second.b()].map(pos);
            let Some((x, _, _)) = geom::line_intersection(p[0], p[1], p[2], p[3]) else {
                return Err(reject(kind, "lines do not meet"));
            };
            add_point(&mut b, new, x)?;
            for s in [first, second] {
                let near = if pos(s.a()).dist(x) <= pos(s.b()).dist(x) { s.a() } else { s.b() };
                b.add_segment(seg(near, new));
                facts.push(Fact::collinear([s.a().clone(), s.b().clone(), new.clone()]));
            }
        }
    }
    let tag = Provenance::Construction(kind.canonical());
    for f in &facts {
        b.add_fact(f.clone(), tag.clone());
    }
    Ok((b.build()?, facts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_one_connect() {
        let s = Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[1.0, 0.0]).build().unwrap();
        let c = Conclusion::new(Fact::parallel("AB", "AB"));
        let st = generate_strategies(&s, &c);
        assert_eq!(st.len(), 1);
        assert_eq!(st[0].canonical(), "connect(A,B)");
        assert_eq!(st[0].code, 1);
    }

    fn midline_scene() -> (Scene, Conclusion) {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("B", &[4.0, 0.0])
            .point("C", &[1.0, 3.0])
            .point("M", &[2.0, 0.0])
            .segment("AB")
            .segment("BC")
            .segment("AC")
            .segment("CM")
            .fact(Fact::midpoint("M", "AB"))
            .build()
            .unwrap();
        (s, Conclusion::new(Fact::parallel("MN", "BC")).with_witness("N", "AC"))
    }

    #[test]
    fn goal_directed_midpoint_takes_witness_label() {
        let (s, c) = midline_scene();
        let st = generate_strategies(&s, &c);
        let names: Vec<String> = st.iter().map(Strategy::canonical).collect();
        assert!(names.contains(&"midpoint(A,C)->N".to_owned()), "{names:?}");
        assert!(names.contains(&"parallelogram(C;A,B)->D".to_owned()), "{names:?}");
    }

    #[test]
    fn apply_midpoint() {
        let (s, c) = midline_scene();
        let st = generate_strategies(&s, &c);
        let m = st.iter().find(|x| x.canonical() == "midpoint(A,C)->N").unwrap();
        let (t, facts) = apply_strategy(&s, m).unwrap();
        assert_eq!(facts, vec![Fact::midpoint("N", "AC")]);
        assert_eq!(t.pos(&"N".into()).unwrap(), Vec3::new(0.5, 1.5, 0.0));
        assert_eq!(s.points().len(), 4);
        assert!(t.has_segment(&"AN".into()) && t.has_segment(&"CN".into()));
    }

    #[test]
    fn connect_twice_rejected() {
        let (s, _) = midline_scene();
        let st = Strategy { code: 1, kind: StrategyKind::Connect { a: "A".into(), b: "B".into() } };
        assert!(matches!(apply_strategy(&s, &st), Err(StrategyError::Rejected { .. })));
    }

    #[test]
    fn connect_records_collinearity() {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("M", &[1.0, 0.0])
            .point("B", &[2.0, 0.0])
            .segment("AM")
            .build()
            .unwrap();
        let st = Strategy { code: 1, kind: StrategyKind::Connect { a: "B".into(), b: "M".into() } };
        let (t, facts) = apply_strategy(&s, &st).unwrap();
        assert_eq!(facts, vec![Fact::collinear(["A", "B", "M"])]);
        assert_eq!(t.segments().len(), 2);
    }

    #[test]
    fn extension_meets_outside() {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("B", &[1.0, 0.0])
            .point("C", &[3.0, 1.0])
            .point("D", &[3.0, 2.0])
            .segment("AB")
            .segment("CD")
            .build()
            .unwrap();
        let c = Conclusion::new(Fact::perpendicular("AB", "CD"));
        let st = generate_strategies(&s, &c);
        let ext = st.iter().find(|x| x.kind.kind_name() == "extend").expect("extension");
        assert_eq!(ext.canonical(), "extend(A,B;C,D)->X1");
        let (t, _) = apply_strategy(&s, ext).unwrap();
        assert_eq!(t.pos(&"X1".into()).unwrap(), Vec3::new(3.0, 0.0, 0.0));
        assert!(t.has_segment(&Segment::new("B", "X1")) && t.has_segment(&Segment::new("C", "X1")));
    }
}
