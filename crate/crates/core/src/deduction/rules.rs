//! The compiled-in rule pack.
//!
//! Join rules receive one newly derived fact and look for partner premises in
//! the whole fact base. Seed rules read the scene coordinates directly and fire
//! once per saturation.

use indexmap::IndexMap;

use super::DeductionError;
use crate::geom;
use crate::scene::{CircleDef, Fact, Label, PlaneRef, Provenance, Scene, Segment, Tri};

type Facts = IndexMap<Fact, Provenance>;
type Out = Vec<(Fact, Vec<Fact>)>;
type SeedFn = fn(&Scene) -> Out;
type JoinFn = fn(&Scene, &Facts, &Fact) -> Out;

/// Relative tolerance for the numeric side-length comparisons of the SSS rules.
const SSS_REL: f64 = 1e-9;

#[derive(Clone, Copy)]
pub struct Rule {
    pub id: &'static str,
    seed: Option<SeedFn>,
    join: Option<JoinFn>,
}

impl std::fmt::Debug for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id)
    }
}

impl Rule {
    pub(super) fn seed(&self, scene: &Scene) -> Out {
        self.seed.map(|s| s(scene)).unwrap_or_default()
    }

    pub(super) fn join(&self, scene: &Scene, facts: &Facts, d: &Fact) -> Out {
        self.join.map(|j| j(scene, facts, d)).unwrap_or_default()
    }
}

const fn join(id: &'static str, f: JoinFn) -> Rule {
    Rule { id, seed: None, join: Some(f) }
}

const fn seed(id: &'static str, f: SeedFn) -> Rule {
    Rule { id, seed: Some(f), join: None }
}

const STANDARD: &[Rule] = &[
    join("midpoint-def", midpoint_def),
    join("midline", midline),
    join("parallelogram-diagonals", parallelogram_diagonals),
    join("parallel-transitivity", parallel_transitivity),
    join("perpendicular-transfer", perpendicular_transfer),
    join("collinear-parallel", collinear_parallel),
    join("collinear-midpoint", collinear_midpoint),
    join("equal-transitivity", equal_transitivity),
    seed("plane-membership", plane_membership),
    join("line-plane-parallel", line_plane_parallel),
    seed("sss-congruence", sss_congruence),
    seed("sss-similarity", sss_similarity),
    seed("on-circle", on_circle),
    join("thales", thales),
];

/// An ordered rule selection.
#[derive(Clone, Debug)]
pub struct RuleSet(Vec<Rule>);

impl RuleSet {
    pub fn standard() -> Self {
        RuleSet(STANDARD.to_vec())
    }

    pub fn empty() -> Self {
        RuleSet(Vec::new())
    }

    /// The named rules, kept in standard order.
    pub fn only(ids: &[&str]) -> Result<Self, DeductionError> {
        for id in ids {
            if !STANDARD.iter().any(|r| r.id == *id) {
                return Err(DeductionError::UnknownRule((*id).to_owned()));
            }
        }
        Ok(RuleSet(STANDARD.iter().filter(|r| ids.contains(&r.id)).copied().collect()))
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.0.iter().map(|r| r.id).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Rule> {
        self.0.iter()
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::standard()
    }
}

fn premises(mut v: Vec<Fact>) -> Vec<Fact> {
    v.sort();
    v
}

fn seg(a: &Label, b: &Label) -> Segment {
    Segment::new(a.clone(), b.clone())
}

fn non_collinear(scene: &Scene, a: &Label, b: &Label, c: &Label) -> bool {
    matches!(scene.collinear_labels(a, b, c), Ok(false))
}

/// Whether two lines lie on one carrier.
fn same_carrier(scene: &Scene, p: &Segment, q: &Segment) -> bool {
    let (Ok(a), Ok(b), Ok(c), Ok(d)) = (scene.pos(p.a()), scene.pos(p.b()), scene.pos(q.a()), scene.pos(q.b())) else {
        return true;
    };
    scene.on_line(a, b, c) && scene.on_line(a, b, d)
}

/// For a pair of lines sharing one member, the two remaining members.
fn bridge(p: &Segment, q: &Segment, u: &Segment, v: &Segment) -> Option<(Segment, Segment)> {
    if p == u {
        Some((q.clone(), v.clone()))
    } else if p == v {
        Some((q.clone(), u.clone()))
    } else if q == u {
        Some((p.clone(), v.clone()))
    } else if q == v {
        Some((p.clone(), u.clone()))
    } else {
        None
    }
}

fn midpoint_def(_: &Scene, _: &Facts, d: &Fact) -> Out {
    let Fact::Midpoint(m, s) = d else { return Vec::new() };
    vec![
        (Fact::collinear([m.clone(), s.a().clone(), s.b().clone()]), vec![d.clone()]),
        (Fact::equal_segments(seg(m, s.a()), seg(m, s.b())), vec![d.clone()]),
    ]
}

fn midline(scene: &Scene, facts: &Facts, d: &Fact) -> Out {
    let Fact::Midpoint(m, s1) = d else { return Vec::new() };
    let mut out = Vec::new();
    for f in facts.keys() {
        let Fact::Midpoint(n, s2) = f else { continue };
        if f == d || n == m || s1 == s2 {
            continue;
        }
        let x = if s2.contains(s1.a()) {
            s1.a()
        } else if s2.contains(s1.b()) {
            s1.b()
        } else {
            continue;
        };
        let y = s1.other(x).unwrap();
        let z = s2.other(x).unwrap();
        if non_collinear(scene, x, y, z) {
            out.push((Fact::parallel(seg(m, n), seg(y, z)), premises(vec![d.clone(), f.clone()])));
        }
    }
    out
}

fn parallelogram_diagonals(scene: &Scene, facts: &Facts, d: &Fact) -> Out {
    let Fact::Midpoint(m, s1) = d else { return Vec::new() };
    let mut out = Vec::new();
    for f in facts.keys() {
        let Fact::Midpoint(m2, s2) = f else { continue };
        if m2 != m || s1 == s2 || s1.shares_endpoint(s2) {
            continue;
        }
        let (a, c) = (s1.a(), s1.b());
        let (b, dd) = (s2.a(), s2.b());
        if !non_collinear(scene, a, c, b) {
            continue;
        }
        let ps = premises(vec![d.clone(), f.clone()]);
        out.push((Fact::parallel(seg(a, b), seg(c, dd)), ps.clone()));
        out.push((Fact::parallel(seg(a, dd), seg(b, c)), ps.clone()));
        out.push((Fact::equal_segments(seg(a, b), seg(c, dd)), ps.clone()));
        out.push((Fact::equal_segments(seg(a, dd), seg(b, c)), ps));
    }
    out
}

fn parallel_transitivity(scene: &Scene, facts: &Facts, d: &Fact) -> Out {
    let Fact::Parallel(p, q) = d else { return Vec::new() };
    let mut out = Vec::new();
    for f in facts.keys() {
        let Fact::Parallel(u, v) = f else { continue };
        if f == d {
            continue;
        }
        if let Some((x, y)) = bridge(p, q, u, v) {
            if x != y && !same_carrier(scene, &x, &y) {
                out.push((Fact::parallel(x, y), premises(vec![d.clone(), f.clone()])));
            }
        }
    }
    out
}

fn perpendicular_transfer(_: &Scene, facts: &Facts, d: &Fact) -> Out {
    let mut out = Vec::new();
    let mut emit = |par: &Fact, perp: &Fact| {
        let (Fact::Parallel(p, q), Fact::Perpendicular(u, v)) = (par, perp) else { return };
        for (line, other) in [(p, q), (q, p)] {
            for (side, across) in [(u, v), (v, u)] {
                if line == side && other != across {
                    out.push((
                        Fact::perpendicular(other.clone(), across.clone()),
                        premises(vec![par.clone(), perp.clone()]),
                    ));
                }
            }
        }
    };
    match d {
        Fact::Parallel(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::Perpendicular(..))) {
                emit(d, f);
            }
        }
        Fact::Perpendicular(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::Parallel(..))) {
                emit(f, d);
            }
        }
        _ => {}
    }
    out
}

fn collinear_parallel(_: &Scene, facts: &Facts, d: &Fact) -> Out {
    let mut out = Vec::new();
    let mut emit = |par: &Fact, col: &Fact| {
        let (Fact::Parallel(p, q), Fact::Collinear(ls)) = (par, col) else { return };
        for (line, other) in [(p, q), (q, p)] {
            if !(ls.contains(line.a()) && ls.contains(line.b())) {
                continue;
            }
            for x in ls.iter().filter(|x| !line.contains(x)) {
                for end in [line.a(), line.b()] {
                    out.push((Fact::parallel(seg(end, x), other.clone()), premises(vec![par.clone(), col.clone()])));
                }
            }
        }
    };
    match d {
        Fact::Parallel(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::Collinear(..))) {
                emit(d, f);
            }
        }
        Fact::Collinear(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::Parallel(..))) {
                emit(f, d);
            }
        }
        _ => {}
    }
    out
}

fn collinear_midpoint(scene: &Scene, facts: &Facts, d: &Fact) -> Out {
    let mut out = Vec::new();
    let mut emit = |col: &Fact, eq: &Fact| {
        let (Fact::Collinear(ls), Fact::EqualSegments(s, t)) = (col, eq) else { return };
        let Some(m) = [s.a(), s.b()].into_iter().find(|l| t.contains(l)) else { return };
        let (a, b) = (s.other(m).unwrap(), t.other(m).unwrap());
        if a == b || !ls.contains(m) || !ls.contains(a) || !ls.contains(b) {
            return;
        }
        let (Ok(pa), Ok(pb), Ok(pm)) = (scene.pos(a), scene.pos(b), scene.pos(m)) else { return };
        if scene.strictly_between(pa, pb, pm) {
            out.push((Fact::midpoint(m.clone(), seg(a, b)), premises(vec![col.clone(), eq.clone()])));
        }
    };
    match d {
        Fact::Collinear(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::EqualSegments(..))) {
                emit(d, f);
            }
        }
        Fact::EqualSegments(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::Collinear(..))) {
                emit(f, d);
            }
        }
        _ => {}
    }
    out
}

fn equal_transitivity(_: &Scene, facts: &Facts, d: &Fact) -> Out {
    let Fact::EqualSegments(p, q) = d else { return Vec::new() };
    let mut out = Vec::new();
    for f in facts.keys() {
        let Fact::EqualSegments(u, v) = f else { continue };
        if f == d {
            continue;
        }
        if let Some((x, y)) = bridge(p, q, u, v) {
            if x != y {
                out.push((Fact::equal_segments(x, y), premises(vec![d.clone(), f.clone()])));
            }
        }
    }
    out
}

fn plane_membership(scene: &Scene) -> Out {
    let mut out = Vec::new();
    for plane in scene.planes() {
        let on: Vec<&Label> = scene.labels().filter(|l| scene.on_plane(plane, scene.pos(l).unwrap())).collect();
        for i in 0..on.len() {
            for j in i + 1..on.len() {
                out.push((Fact::in_plane(seg(on[i], on[j]), plane.clone()), Vec::new()));
            }
        }
    }
    out
}

fn off_plane(scene: &Scene, line: &Segment, plane: &PlaneRef) -> bool {
    if scene.plane_frame(plane).is_none() {
        return false;
    }
    [line.a(), line.b()].iter().any(|l| scene.pos(l).map(|p| !scene.on_plane(plane, p)).unwrap_or(false))
}

fn line_plane_parallel(scene: &Scene, facts: &Facts, d: &Fact) -> Out {
    let mut out = Vec::new();
    let mut emit = |par: &Fact, inp: &Fact| {
        let (Fact::Parallel(p, q), Fact::InPlane(s, plane)) = (par, inp) else { return };
        for (line, other) in [(p, q), (q, p)] {
            if other == s && off_plane(scene, line, plane) {
                out.push((
                    Fact::parallel_to_plane(line.clone(), plane.clone()),
                    premises(vec![par.clone(), inp.clone()]),
                ));
            }
        }
    };
    match d {
        Fact::Parallel(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::InPlane(..))) {
                emit(d, f);
            }
        }
        Fact::InPlane(..) => {
            for f in facts.keys().filter(|f| matches!(f, Fact::Parallel(..))) {
                emit(f, d);
            }
        }
        _ => {}
    }
    out
}

fn sorted_sides(scene: &Scene, t: &Tri) -> [f64; 3] {
    let [a, b, c] = t.vertices();
    let mut s = [
        scene.segment_length(&seg(a, b)).unwrap(),
        scene.segment_length(&seg(b, c)).unwrap(),
        scene.segment_length(&seg(a, c)).unwrap(),
    ];
    s.sort_by(f64::total_cmp);
    s
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= SSS_REL * x.abs().max(y.abs())
}

fn triangle_pairs(scene: &Scene, test: fn(&[f64; 3], &[f64; 3]) -> bool, make: fn(Tri, Tri) -> Fact) -> Out {
    let tris = scene.triangles();
    let sides: Vec<[f64; 3]> = tris.iter().map(|t| sorted_sides(scene, t)).collect();
    let mut out = Vec::new();
    for i in 0..tris.len() {
        for j in i + 1..tris.len() {
            if test(&sides[i], &sides[j]) {
                out.push((make(tris[i].clone(), tris[j].clone()), Vec::new()));
            }
        }
    }
    out
}

fn sss_congruence(scene: &Scene) -> Out {
    triangle_pairs(scene, |a, b| (0..3).all(|k| close(a[k], b[k])), Fact::congruent)
}

fn sss_similarity(scene: &Scene) -> Out {
    triangle_pairs(
        scene,
        |a, b| {
            let r = [b[0] / a[0], b[1] / a[1], b[2] / a[2]];
            close(r[0], r[1]) && close(r[1], r[2])
        },
        Fact::similar,
    )
}

fn on_circle(scene: &Scene) -> Out {
    let mut out = Vec::new();
    for c in scene.circles() {
        let (center, radius) = match &c.def {
            CircleDef::Center { center, radius } => (scene.pos(center).unwrap(), *radius),
            CircleDef::Diameter { ends } => {
                let (a, b) = (scene.pos(ends.a()).unwrap(), scene.pos(ends.b()).unwrap());
                (a.midpoint(b), a.dist(b) / 2.0)
            }
        };
        for l in scene.labels() {
            let p = scene.pos(l).unwrap();
            if (p.dist(center) - radius).abs() <= geom::INCIDENCE_EPS * radius.max(1.0) {
                out.push((Fact::OnCircle(l.clone(), c.name.clone()), Vec::new()));
            }
        }
    }
    out
}

fn thales(scene: &Scene, _: &Facts, d: &Fact) -> Out {
    let Fact::OnCircle(p, name) = d else { return Vec::new() };
    let Some(c) = scene.circles().iter().find(|c| &c.name == name) else { return Vec::new() };
    let CircleDef::Diameter { ends } = &c.def else { return Vec::new() };
    if ends.contains(p) {
        return Vec::new();
    }
    vec![(Fact::perpendicular(seg(p, ends.a()), seg(p, ends.b())), vec![d.clone()])]
}

#[cfg(test)]
mod tests {
    use super::super::{saturate, KnowledgeBase};
    use super::*;
    use crate::scene::Circle;

    fn run(scene: &Scene, ids: &[&str]) -> KnowledgeBase {
        saturate(scene, &KnowledgeBase::new(), &RuleSet::only(ids).unwrap(), 1000)
    }

    #[test]
    fn unknown_rule_id() {
        assert!(matches!(RuleSet::only(&["nope"]), Err(DeductionError::UnknownRule(_))));
    }

    #[test]
    fn parallelogram_from_shared_midpoint() {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("B", &[4.0, 0.0])
            .point("C", &[5.0, 2.0])
            .point("D", &[1.0, 2.0])
            .point("M", &[2.5, 1.0])
            .fact(Fact::midpoint("M", "AC"))
            .fact(Fact::midpoint("M", "BD"))
            .build()
            .unwrap();
        let kb = run(&s, &["parallelogram-diagonals"]);
        assert!(kb.contains(&Fact::parallel("AB", "CD")));
        assert!(kb.contains(&Fact::parallel("AD", "BC")));
        assert!(kb.contains(&Fact::equal_segments("AB", "CD")));
    }

    #[test]
    fn collinear_equal_gives_midpoint() {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("M", &[1.0, 1.0])
            .point("B", &[2.0, 2.0])
            .fact(Fact::collinear(["A", "M", "B"]))
            .fact(Fact::equal_segments("AM", "MB"))
            .build()
            .unwrap();
        assert!(run(&s, &["collinear-midpoint"]).contains(&Fact::midpoint("M", "AB")));
    }

    #[test]
    fn perpendicular_moves_across_parallels() {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("B", &[1.0, 0.0])
            .point("C", &[0.0, 1.0])
            .point("D", &[1.0, 1.0])
            .point("E", &[3.0, 0.0])
            .point("F", &[3.0, 1.0])
            .fact(Fact::parallel("AB", "CD"))
            .fact(Fact::perpendicular("AB", "EF"))
            .build()
            .unwrap();
        assert!(run(&s, &["perpendicular-transfer"]).contains(&Fact::perpendicular("CD", "EF")));
    }

    #[test]
    fn line_parallel_to_plane() {
        let s = Scene::builder(3)
            .point("A", &[0.0, 0.0, 0.0])
            .point("B", &[1.0, 0.0, 0.0])
            .point("C", &[0.0, 1.0, 0.0])
            .point("P", &[0.0, 0.0, 1.0])
            .point("Q", &[1.0, 0.0, 1.0])
            .plane(PlaneRef::new(["A", "B", "C"]))
            .fact(Fact::parallel("AB", "PQ"))
            .build()
            .unwrap();
        let kb = run(&s, &["plane-membership", "line-plane-parallel"]);
        assert!(kb.contains(&Fact::parallel_to_plane("PQ", PlaneRef::new(["A", "B", "C"]))));
        assert!(!kb.contains(&Fact::parallel_to_plane("AB", PlaneRef::new(["A", "B", "C"]))));
    }

    #[test]
    fn thales_right_angle() {
        let s = Scene::builder(2)
            .point("A", &[-1.0, 0.0])
            .point("C", &[1.0, 0.0])
            .point("B", &[0.6, 0.8])
            .circle(Circle { name: "O".into(), def: CircleDef::Diameter { ends: Segment::from("AC") } })
            .build()
            .unwrap();
        let kb = run(&s, &["on-circle", "thales"]);
        assert!(kb.contains(&Fact::OnCircle("B".into(), "O".into())));
        assert!(kb.contains(&Fact::perpendicular("AB", "BC")));
    }

    #[test]
    fn sss_rules_use_coordinates() {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("B", &[3.0, 0.0])
            .point("C", &[0.0, 4.0])
            .point("D", &[10.0, 0.0])
            .point("E", &[16.0, 0.0])
            .point("F", &[10.0, 8.0])
            .segment("AB")
            .segment("BC")
            .segment("AC")
            .segment("DE")
            .segment("EF")
            .segment("DF")
            .build()
            .unwrap();
        let kb = run(&s, &["sss-congruence", "sss-similarity"]);
        assert!(kb.contains(&Fact::similar(Tri::new("A", "B", "C"), Tri::new("D", "E", "F"))));
        assert!(!kb.contains(&Fact::congruent(Tri::new("A", "B", "C"), Tri::new("D", "E", "F"))));
    }
}
