//! Geometric configurations: points, segments, circles, planes and facts.
//!
//! A [`Scene`] is immutable once built. New scenes are produced by turning an
//! existing one back into a [`SceneBuilder`], extending it and validating again.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{self, Vec3, INCIDENCE_EPS};

/// Relative coincidence tolerance: two points coincide when their distance is
/// at most this fraction of the scene diameter.
pub const COINCIDENCE_REL: f64 = 1e-6;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(u8),
    #[error("scene has no points")]
    Empty,
    #[error("duplicate point label `{0}`")]
    DuplicateLabel(Label),
    #[error("point `{label}` has {got} coordinates, scene dimension is {expected}")]
    DimensionMismatch { label: Label, expected: u8, got: usize },
    #[error("point `{0}` has a non-finite coordinate")]
    NonFinite(Label),
    #[error("points `{0}` and `{1}` coincide")]
    CoincidentPoints(Label, Label),
    #[error("unknown point `{0}`")]
    UnknownPoint(Label),
    #[error("unknown circle `{0}`")]
    UnknownCircle(String),
    #[error("duplicate circle `{0}`")]
    DuplicateCircle(String),
    #[error("segment with identical endpoints `{0}`")]
    DegenerateSegment(Label),
    #[error("duplicate segment {0}")]
    DuplicateSegment(Segment),
    #[error("circle `{0}` has a non-positive radius")]
    NonPositiveRadius(String),
    #[error("plane {0} needs at least three non-collinear points")]
    DegeneratePlane(PlaneRef),
    #[error("fact {0} is malformed")]
    MalformedFact(Box<Fact>),
    #[error("degenerate angle at `{0}`")]
    DegenerateAngle(Label),
}

/// Point identity. Ordering is plain string order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub String);

impl Label {
    pub fn new(s: impl Into<String>) -> Self {
        Label(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Given,
    Auxiliary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub label: Label,
    pub pos: Vec3,
    pub origin: Origin,
}

/// Unordered pair of distinct labels, stored smaller first.
///
/// Used both for drawn segments and for the lines that facts talk about.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(Label, Label)", into = "(Label, Label)")]
pub struct Segment(Label, Label);

impl Segment {
    pub fn new(a: impl Into<Label>, b: impl Into<Label>) -> Self {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            Segment(a, b)
        } else {
            Segment(b, a)
        }
    }

    pub fn a(&self) -> &Label {
        &self.0
    }

    pub fn b(&self) -> &Label {
        &self.1
    }

    pub fn contains(&self, l: &Label) -> bool {
        &self.0 == l || &self.1 == l
    }

    /// The endpoint that is not `l`, if `l` is an endpoint.
    pub fn other(&self, l: &Label) -> Option<&Label> {
        if &self.0 == l {
            Some(&self.1)
        } else if &self.1 == l {
            Some(&self.0)
        } else {
            None
        }
    }

    pub fn shares_endpoint(&self, o: &Segment) -> bool {
        self.contains(&o.0) || self.contains(&o.1)
    }
}

impl From<(Label, Label)> for Segment {
    fn from((a, b): (Label, Label)) -> Self {
        Segment::new(a, b)
    }
}

impl From<Segment> for (Label, Label) {
    fn from(s: Segment) -> Self {
        (s.0, s.1)
    }
}

impl From<&str> for Segment {
    /// `"AB"` style shorthand for single-character labels.
    fn from(s: &str) -> Self {
        let mut it = s.chars();
        let a = it.next().expect("segment shorthand needs two labels");
        let b = it.next().expect("segment shorthand needs two labels");
        Segment::new(Label(a.to_string()), Label(b.to_string()))
    }
}

fn join_labels<'a>(f: &mut fmt::Formatter<'_>, labels: impl IntoIterator<Item = &'a Label>) -> fmt::Result {
    let labels: Vec<&Label> = labels.into_iter().collect();
    let sep = if labels.iter().all(|l| l.0.chars().count() == 1) { "" } else { "-" };
    for (i, l) in labels.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        f.write_str(&l.0)?;
    }
    Ok(())
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        join_labels(f, [&self.0, &self.1])
    }
}

/// Angle with a vertex and two arms; arms stored sorted.
///
/// Serialized as `[arm, vertex, arm]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[Label; 3]", into = "[Label; 3]")]
pub struct Angle {
    pub vertex: Label,
    pub arms: (Label, Label),
}

impl Angle {
    pub fn new(a: impl Into<Label>, vertex: impl Into<Label>, b: impl Into<Label>) -> Self {
        let (a, b) = (a.into(), b.into());
        let arms = if a <= b { (a, b) } else { (b, a) };
        Angle { vertex: vertex.into(), arms }
    }
}

impl From<[Label; 3]> for Angle {
    fn from([a, v, b]: [Label; 3]) -> Self {
        Angle::new(a, v, b)
    }
}

impl From<Angle> for [Label; 3] {
    fn from(a: Angle) -> Self {
        [a.arms.0, a.vertex, a.arms.1]
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("∠")?;
        join_labels(f, [&self.arms.0, &self.vertex, &self.arms.1])
    }
}

/// Triangle named by its three sorted vertices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[Label; 3]", into = "[Label; 3]")]
pub struct Tri([Label; 3]);

impl Tri {
    pub fn new(a: impl Into<Label>, b: impl Into<Label>, c: impl Into<Label>) -> Self {
        let mut v = [a.into(), b.into(), c.into()];
        v.sort();
        Tri(v)
    }

    pub fn vertices(&self) -> &[Label; 3] {
        &self.0
    }
}

impl From<[Label; 3]> for Tri {
    fn from([a, b, c]: [Label; 3]) -> Self {
        Tri::new(a, b, c)
    }
}

impl From<Tri> for [Label; 3] {
    fn from(t: Tri) -> Self {
        t.0
    }
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("△")?;
        join_labels(f, &self.0)
    }
}

/// Plane named by the sorted set of labelled points it passes through.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Label>", into = "Vec<Label>")]
pub struct PlaneRef(Vec<Label>);

impl PlaneRef {
    pub fn new<L: Into<Label>>(labels: impl IntoIterator<Item = L>) -> Self {
        let mut v: Vec<Label> = labels.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        PlaneRef(v)
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn contains(&self, l: &Label) -> bool {
        self.0.binary_search(l).is_ok()
    }
}

impl From<Vec<Label>> for PlaneRef {
    fn from(v: Vec<Label>) -> Self {
        PlaneRef::new(v)
    }
}

impl From<PlaneRef> for Vec<Label> {
    fn from(p: PlaneRef) -> Self {
        p.0
    }
}

impl fmt::Display for PlaneRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("plane ")?;
        join_labels(f, &self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleDef {
    Center { center: Label, radius: f64 },
    Diameter { ends: Segment },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub name: String,
    #[serde(flatten)]
    pub def: CircleDef,
}

/// A relation between scene entities. Constructors canonicalize arguments so
/// that two equal relations compare equal syntactically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fact {
    Parallel(Segment, Segment),
    Perpendicular(Segment, Segment),
    Midpoint(Label, Segment),
    Collinear(Vec<Label>),
    EqualSegments(Segment, Segment),
    EqualAngles(Angle, Angle),
    Congruent(Tri, Tri),
    Similar(Tri, Tri),
    OnCircle(Label, String),
    InPlane(Segment, PlaneRef),
    ParallelToPlane(Segment, PlaneRef),
}

fn sorted_pair<T: Ord>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Fact {
    pub fn parallel(a: impl Into<Segment>, b: impl Into<Segment>) -> Fact {
        let (a, b) = sorted_pair(a.into(), b.into());
        Fact::Parallel(a, b)
    }

    pub fn perpendicular(a: impl Into<Segment>, b: impl Into<Segment>) -> Fact {
        let (a, b) = sorted_pair(a.into(), b.into());
        Fact::Perpendicular(a, b)
    }

    pub fn midpoint(m: impl Into<Label>, s: impl Into<Segment>) -> Fact {
        Fact::Midpoint(m.into(), s.into())
    }

    pub fn collinear<L: Into<Label>>(labels: impl IntoIterator<Item = L>) -> Fact {
        let mut v: Vec<Label> = labels.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        Fact::Collinear(v)
    }

    pub fn equal_segments(a: impl Into<Segment>, b: impl Into<Segment>) -> Fact {
        let (a, b) = sorted_pair(a.into(), b.into());
        Fact::EqualSegments(a, b)
    }

    pub fn equal_angles(a: Angle, b: Angle) -> Fact {
        let (a, b) = sorted_pair(a, b);
        Fact::EqualAngles(a, b)
    }

    pub fn congruent(a: Tri, b: Tri) -> Fact {
        let (a, b) = sorted_pair(a, b);
        Fact::Congruent(a, b)
    }

    pub fn similar(a: Tri, b: Tri) -> Fact {
        let (a, b) = sorted_pair(a, b);
        Fact::Similar(a, b)
    }

    pub fn in_plane(s: impl Into<Segment>, p: PlaneRef) -> Fact {
        Fact::InPlane(s.into(), p)
    }

    pub fn parallel_to_plane(s: impl Into<Segment>, p: PlaneRef) -> Fact {
        Fact::ParallelToPlane(s.into(), p)
    }

    /// Re-establishes canonical argument order.
    pub fn canonical(self) -> Fact {
        match self {
            Fact::Parallel(a, b) => Fact::parallel(a, b),
            Fact::Perpendicular(a, b) => Fact::perpendicular(a, b),
            Fact::Collinear(v) => Fact::collinear(v),
            Fact::EqualSegments(a, b) => Fact::equal_segments(a, b),
            Fact::EqualAngles(a, b) => Fact::equal_angles(a, b),
            Fact::Congruent(a, b) => Fact::congruent(a, b),
            Fact::Similar(a, b) => Fact::similar(a, b),
            other => other,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Fact::Parallel(..) => "parallel",
            Fact::Perpendicular(..) => "perpendicular",
            Fact::Midpoint(..) => "midpoint",
            Fact::Collinear(..) => "collinear",
            Fact::EqualSegments(..) => "equal_segments",
            Fact::EqualAngles(..) => "equal_angles",
            Fact::Congruent(..) => "congruent",
            Fact::Similar(..) => "similar",
            Fact::OnCircle(..) => "on_circle",
            Fact::InPlane(..) => "in_plane",
            Fact::ParallelToPlane(..) => "parallel_to_plane",
        }
    }

    /// Every point label mentioned by the fact.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        let seg = |s: &Segment, out: &mut BTreeSet<Label>| {
            out.insert(s.0.clone());
            out.insert(s.1.clone());
        };
        match self {
            Fact::Parallel(a, b) | Fact::Perpendicular(a, b) | Fact::EqualSegments(a, b) => {
                seg(a, &mut out);
                seg(b, &mut out);
            }
            Fact::Midpoint(m, s) => {
                out.insert(m.clone());
                seg(s, &mut out);
            }
            Fact::Collinear(v) => out.extend(v.iter().cloned()),
            Fact::EqualAngles(a, b) => {
                for x in [a, b] {
                    out.insert(x.vertex.clone());
                    out.insert(x.arms.0.clone());
                    out.insert(x.arms.1.clone());
                }
            }
            Fact::Congruent(a, b) | Fact::Similar(a, b) => {
                out.extend(a.0.iter().cloned());
                out.extend(b.0.iter().cloned());
            }
            Fact::OnCircle(p, _) => {
                out.insert(p.clone());
            }
            Fact::InPlane(s, p) | Fact::ParallelToPlane(s, p) => {
                seg(s, &mut out);
                out.extend(p.0.iter().cloned());
            }
        }
        out
    }

    /// Structural sanity: no degenerate segments, enough collinear points.
    pub fn is_well_formed(&self) -> bool {
        let seg_ok = |s: &Segment| s.0 != s.1;
        match self {
            Fact::Parallel(a, b) | Fact::Perpendicular(a, b) | Fact::EqualSegments(a, b) => {
                seg_ok(a) && seg_ok(b) && a != b
            }
            Fact::Midpoint(m, s) => seg_ok(s) && !s.contains(m),
            Fact::Collinear(v) => v.len() >= 3,
            Fact::EqualAngles(a, b) => {
                let ok = |x: &Angle| x.arms.0 != x.vertex && x.arms.1 != x.vertex;
                ok(a) && ok(b) && a != b
            }
            Fact::Congruent(a, b) | Fact::Similar(a, b) => {
                let ok = |t: &Tri| t.0[0] != t.0[1] && t.0[1] != t.0[2];
                ok(a) && ok(b) && a != b
            }
            Fact::OnCircle(..) => true,
            Fact::InPlane(s, p) | Fact::ParallelToPlane(s, p) => seg_ok(s) && p.0.len() >= 3,
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::Parallel(a, b) => write!(f, "{a} ∥ {b}"),
            Fact::Perpendicular(a, b) => write!(f, "{a} ⊥ {b}"),
            Fact::Midpoint(m, s) => write!(f, "{m} is the midpoint of {s}"),
            Fact::Collinear(v) => {
                f.write_str("collinear(")?;
                join_labels(f, v)?;
                f.write_str(")")
            }
            Fact::EqualSegments(a, b) => write!(f, "{a} = {b}"),
            Fact::EqualAngles(a, b) => write!(f, "{a} = {b}"),
            Fact::Congruent(a, b) => write!(f, "{a} ≅ {b}"),
            Fact::Similar(a, b) => write!(f, "{a} ∼ {b}"),
            Fact::OnCircle(p, c) => write!(f, "{p} on circle {c}"),
            Fact::InPlane(s, p) => write!(f, "{s} ⊂ {p}"),
            Fact::ParallelToPlane(s, p) => write!(f, "{s} ∥ {p}"),
        }
    }
}

/// Where a scene or knowledge-base fact came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Given,
    /// Canonical form of the strategy that introduced the fact.
    Construction(String),
    Derived {
        rule: String,
        premises: Vec<Fact>,
    },
}

/// A point the goal refers to that does not exist yet, constrained to lie on
/// the line through `on` (e.g. "a point F on edge PB").
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub label: Label,
    pub on: Segment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conclusion {
    pub goal: Fact,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
}

impl Conclusion {
    pub fn new(goal: Fact) -> Self {
        Conclusion { goal: goal.canonical(), witnesses: Vec::new() }
    }

    pub fn with_witness(mut self, label: impl Into<Label>, on: impl Into<Segment>) -> Self {
        self.witnesses.push(Witness { label: label.into(), on: on.into() });
        self
    }

    pub fn is_witness(&self, l: &Label) -> bool {
        self.witnesses.iter().any(|w| &w.label == l)
    }

    /// Goal labels present in the scene plus the endpoints of witness hosts.
    pub fn points(&self, scene: &Scene) -> BTreeSet<Label> {
        let mut out: BTreeSet<Label> = self.goal.labels().into_iter().filter(|l| scene.contains(l)).collect();
        for w in &self.witnesses {
            out.insert(w.on.0.clone());
            out.insert(w.on.1.clone());
        }
        out
    }

    /// Every goal label must be a scene point or a declared witness, and
    /// witness hosts must exist.
    pub fn validate(&self, scene: &Scene) -> Result<(), SceneError> {
        for l in self.goal.labels() {
            if !scene.contains(&l) && !self.is_witness(&l) {
                return Err(SceneError::UnknownPoint(l));
            }
        }
        for w in &self.witnesses {
            for l in [&w.on.0, &w.on.1] {
                if !scene.contains(l) {
                    return Err(SceneError::UnknownPoint(l.clone()));
                }
            }
        }
        if !self.goal.is_well_formed() {
            return Err(SceneError::MalformedFact(Box::new(self.goal.clone())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct SceneBuilder {
    dimension: u8,
    points: Vec<Point>,
    segments: Vec<Segment>,
    circles: Vec<Circle>,
    planes: Vec<PlaneRef>,
    facts: Vec<(Fact, Provenance)>,
    reserved: BTreeSet<Label>,
}

impl SceneBuilder {
    pub fn new(dimension: u8) -> Self {
        SceneBuilder { dimension, ..Default::default() }
    }

    fn push_point(&mut self, label: Label, coords: &[f64], origin: Origin) -> Result<(), SceneError> {
        if coords.len() != self.dimension as usize {
            return Err(SceneError::DimensionMismatch { label, expected: self.dimension, got: coords.len() });
        }
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        self.points.push(Point { label, pos: Vec3(c), origin });
        Ok(())
    }

    /// Adds a given point. Panics on a coordinate count mismatch; use
    /// [`SceneBuilder::try_point`] for untrusted input.
    pub fn point(mut self, label: impl Into<Label>, coords: &[f64]) -> Self {
        self.push_point(label.into(), coords, Origin::Given).expect("coordinate count");
        self
    }

    pub fn try_point(&mut self, label: impl Into<Label>, coords: &[f64], origin: Origin) -> Result<(), SceneError> {
        self.push_point(label.into(), coords, origin)
    }

    pub fn add_point(&mut self, label: Label, pos: Vec3, origin: Origin) {
        self.points.push(Point { label, pos, origin });
    }

    pub fn segment(mut self, s: impl Into<Segment>) -> Self {
        self.segments.push(s.into());
        self
    }

    pub fn add_segment(&mut self, s: Segment) {
        self.segments.push(s);
    }

    pub fn circle(mut self, c: Circle) -> Self {
        self.circles.push(c);
        self
    }

    pub fn add_circle(&mut self, c: Circle) {
        self.circles.push(c);
    }

    pub fn plane(mut self, p: PlaneRef) -> Self {
        self.planes.push(p);
        self
    }

    pub fn add_plane(&mut self, p: PlaneRef) {
        self.planes.push(p);
    }

    pub fn fact(mut self, f: Fact) -> Self {
        self.facts.push((f.canonical(), Provenance::Given));
        self
    }

    pub fn add_fact(&mut self, f: Fact, prov: Provenance) {
        self.facts.push((f.canonical(), prov));
    }

    pub fn has_segment(&self, s: &Segment) -> bool {
        self.segments.contains(s)
    }

    /// Keeps `l` out of the fresh-label pool without adding a point.
    pub fn reserve(&mut self, l: Label) {
        self.reserved.insert(l);
    }

    pub fn build(self) -> Result<Scene, SceneError> {
        if !(2..=3).contains(&self.dimension) {
            return Err(SceneError::BadDimension(self.dimension));
        }
        if self.points.is_empty() {
            return Err(SceneError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, p) in self.points.iter().enumerate() {
            if p.pos.0.iter().any(|c| !c.is_finite()) {
                return Err(SceneError::NonFinite(p.label.clone()));
            }
            if index.insert(p.label.clone(), i).is_some() {
                return Err(SceneError::DuplicateLabel(p.label.clone()));
            }
        }
        let diameter = diameter(&self.points);
        let tol = COINCIDENCE_REL * diameter;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                if p.pos.dist(q.pos) <= tol {
                    return Err(SceneError::CoincidentPoints(p.label.clone(), q.label.clone()));
                }
            }
        }
        let known = |l: &Label| -> Result<(), SceneError> {
            if index.contains_key(l) {
                Ok(())
            } else {
                Err(SceneError::UnknownPoint(l.clone()))
            }
        };
        let mut segments = BTreeSet::new();
        for s in self.segments {
            known(&s.0)?;
            known(&s.1)?;
            if s.0 == s.1 {
                return Err(SceneError::DegenerateSegment(s.0));
            }
            if !segments.insert(s.clone()) {
                return Err(SceneError::DuplicateSegment(s));
            }
        }
        let mut circle_names = BTreeSet::new();
        for c in &self.circles {
            if !circle_names.insert(c.name.clone()) {
                return Err(SceneError::DuplicateCircle(c.name.clone()));
            }
            match &c.def {
                CircleDef::Center { center, radius } => {
                    known(center)?;
                    if radius.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !radius.is_finite() {
                        return Err(SceneError::NonPositiveRadius(c.name.clone()));
                    }
                }
                CircleDef::Diameter { ends } => {
                    known(&ends.0)?;
                    known(&ends.1)?;
                    if ends.0 == ends.1 {
                        return Err(SceneError::DegenerateSegment(ends.0.clone()));
                    }
                }
            }
        }
        let mut planes: Vec<PlaneRef> = Vec::new();
        for p in self.planes {
            for l in &p.0 {
                known(l)?;
            }
            let pts: Vec<Vec3> = p.0.iter().map(|l| self.points[index[l]].pos).collect();
            if plane_frame(&pts).is_none() {
                return Err(SceneError::DegeneratePlane(p));
            }
            if !planes.contains(&p) {
                planes.push(p);
            }
        }
        let mut facts: Vec<(Fact, Provenance)> = Vec::new();
        for (f, prov) in self.facts {
            if !f.is_well_formed() {
                return Err(SceneError::MalformedFact(Box::new(f)));
            }
            for l in f.labels() {
                known(&l)?;
            }
            if let Fact::OnCircle(_, c) = &f {
                if !circle_names.contains(c) {
                    return Err(SceneError::UnknownCircle(c.clone()));
                }
            }
            if !facts.iter().any(|(g, _)| g == &f) {
                facts.push((f, prov));
            }
        }
        let reserved = self.reserved.into_iter().filter(|l| !index.contains_key(l)).collect();
        Ok(Scene {
            reserved,
            dimension: self.dimension,
            points: self.points,
            index,
            segments,
            circles: self.circles,
            planes,
            facts,
            diameter,
        })
    }
}

fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(p.pos.dist(q.pos));
        }
    }
    d
}

/// First three points that span a plane.
fn plane_frame(pts: &[Vec3]) -> Option<(Vec3, Vec3, Vec3)> {
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                if !geom::collinear(pts[i], pts[j], pts[k]) {
                    return Some((pts[i], pts[j], pts[k]));
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct Scene {
    dimension: u8,
    points: Vec<Point>,
    index: BTreeMap<Label, usize>,
    segments: BTreeSet<Segment>,
    circles: Vec<Circle>,
    planes: Vec<PlaneRef>,
    facts: Vec<(Fact, Provenance)>,
    diameter: f64,
    reserved: BTreeSet<Label>,
}

impl Scene {
    pub fn builder(dimension: u8) -> SceneBuilder {
        SceneBuilder::new(dimension)
    }

    /// A builder holding everything in this scene, for copy-and-extend.
    pub fn to_builder(&self) -> SceneBuilder {
        SceneBuilder {
            dimension: self.dimension,
            points: self.points.clone(),
            segments: self.segments.iter().cloned().collect(),
            circles: self.circles.clone(),
            planes: self.planes.clone(),
            facts: self.facts.clone(),
            reserved: self.reserved.clone(),
        }
    }

    /// Labels of points removed from this scene, kept out of the fresh pool.
    pub fn reserved(&self) -> &BTreeSet<Label> {
        &self.reserved
    }

    /// Whether `l` names a point or a point removed from this scene.
    pub fn label_taken(&self, l: &Label) -> bool {
        self.index.contains_key(l) || self.reserved.contains(l)
    }

    pub fn dimension(&self) -> u8 {
        self.dimension
    }

    /// Points in insertion order.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.index.keys()
    }

    pub fn contains(&self, l: &Label) -> bool {
        self.index.contains_key(l)
    }

    pub fn point(&self, l: &Label) -> Option<&Point> {
        self.index.get(l).map(|&i| &self.points[i])
    }

    pub fn pos(&self, l: &Label) -> Result<Vec3, SceneError> {
        self.point(l).map(|p| p.pos).ok_or_else(|| SceneError::UnknownPoint(l.clone()))
    }

    pub fn segments(&self) -> &BTreeSet<Segment> {
        &self.segments
    }

    pub fn has_segment(&self, s: &Segment) -> bool {
        self.segments.contains(s)
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn planes(&self) -> &[PlaneRef] {
        &self.planes
    }

    pub fn facts(&self) -> &[(Fact, Provenance)] {
        &self.facts
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Absolute tolerance for incidence tests, scaled to the scene.
    pub fn incidence_tol(&self) -> f64 {
        INCIDENCE_EPS * self.diameter.max(1.0)
    }

    pub fn coincides_with_existing(&self, pos: Vec3) -> Option<&Label> {
        let tol = COINCIDENCE_REL * self.diameter;
        self.points.iter().find(|p| p.pos.dist(pos) <= tol).map(|p| &p.label)
    }

    /// Segments incident to `l`, sorted.
    pub fn incident(&self, l: &Label) -> impl Iterator<Item = &Segment> {
        let l = l.clone();
        self.segments.iter().filter(move |s| s.contains(&l))
    }

    pub fn degree(&self, l: &Label) -> usize {
        self.incident(l).count()
    }

    pub fn segment_length(&self, s: &Segment) -> Result<f64, SceneError> {
        Ok(self.pos(&s.0)?.dist(self.pos(&s.1)?))
    }

    /// Unsigned angle at `vertex` between the arms towards `a` and `b`.
    pub fn angle_at(&self, vertex: &Label, a: &Label, b: &Label) -> Result<f64, SceneError> {
        let v = self.pos(vertex)?;
        let u = self.pos(a)? - v;
        let w = self.pos(b)? - v;
        if u.norm() == 0.0 || w.norm() == 0.0 {
            return Err(SceneError::DegenerateAngle(vertex.clone()));
        }
        Ok(geom::vector_angle(u, w))
    }

    pub fn angle(&self, a: &Angle) -> Result<f64, SceneError> {
        self.angle_at(&a.vertex, &a.arms.0, &a.arms.1)
    }

    /// Angle between the segments' directions, each directed from its smaller
    /// label towards its larger one.
    pub fn segment_angle(&self, i: &Segment, j: &Segment) -> Result<f64, SceneError> {
        let u = self.direction(i)?;
        let v = self.direction(j)?;
        Ok(geom::vector_angle(u, v))
    }

    pub fn direction(&self, s: &Segment) -> Result<Vec3, SceneError> {
        let d = self.pos(&s.1)? - self.pos(&s.0)?;
        if d.norm() == 0.0 {
            return Err(SceneError::DegenerateAngle(s.0.clone()));
        }
        Ok(d)
    }

    /// One angle per unordered pair of segments sharing a vertex, by vertex
    /// label then arm labels.
    pub fn enumerate_angles(&self) -> Vec<Angle> {
        let mut out = Vec::new();
        for v in self.index.keys() {
            let arms: Vec<&Label> = self.incident(v).filter_map(|s| s.other(v)).collect();
            let mut arms = arms;
            arms.sort();
            for i in 0..arms.len() {
                for j in i + 1..arms.len() {
                    out.push(Angle::new(arms[i].clone(), v.clone(), arms[j].clone()));
                }
            }
        }
        out
    }

    /// Three pairwise-joined, non-collinear points, in label order.
    pub fn triangles(&self) -> Vec<Tri> {
        let mut out = Vec::new();
        for s in &self.segments {
            for c in self.index.keys().filter(|c| *c > &s.1) {
                if self.segments.contains(&Segment::new(s.0.clone(), c.clone()))
                    && self.segments.contains(&Segment::new(s.1.clone(), c.clone()))
                    && !geom::collinear(
                        self.points[self.index[&s.0]].pos,
                        self.points[self.index[&s.1]].pos,
                        self.points[self.index[c]].pos,
                    )
                {
                    out.push(Tri::new(s.0.clone(), s.1.clone(), c.clone()));
                }
            }
        }
        out
    }

    /// Whether `p` lies on the line through `a` and `b`.
    pub fn on_line(&self, a: Vec3, b: Vec3, p: Vec3) -> bool {
        let (foot, _) = geom::foot_on_line(a, b, p);
        foot.dist(p) <= self.incidence_tol()
    }

    /// Whether `p` lies strictly between `a` and `b`.
    pub fn strictly_between(&self, a: Vec3, b: Vec3, p: Vec3) -> bool {
        let (foot, t) = geom::foot_on_line(a, b, p);
        let len = a.dist(b);
        foot.dist(p) <= self.incidence_tol() && t * len > self.incidence_tol() && (1.0 - t) * len > self.incidence_tol()
    }

    /// All scene points on the line through `s`, sorted by label.
    pub fn points_on_line(&self, s: &Segment) -> Result<Vec<Label>, SceneError> {
        let a = self.pos(&s.0)?;
        let b = self.pos(&s.1)?;
        Ok(self.index.keys().filter(|l| self.on_line(a, b, self.points[self.index[*l]].pos)).cloned().collect())
    }

    pub fn collinear_labels(&self, a: &Label, b: &Label, c: &Label) -> Result<bool, SceneError> {
        Ok(geom::collinear(self.pos(a)?, self.pos(b)?, self.pos(c)?))
    }

    /// Three points spanning the plane, if its labelled points do.
    pub fn plane_frame(&self, p: &PlaneRef) -> Option<(Vec3, Vec3, Vec3)> {
        let pts: Option<Vec<Vec3>> = p.0.iter().map(|l| self.point(l).map(|x| x.pos)).collect();
        plane_frame(&pts?)
    }

    pub fn on_plane(&self, p: &PlaneRef, x: Vec3) -> bool {
        match self.plane_frame(p) {
            Some((a, b, c)) => geom::plane_distance(a, b, c, x).abs() <= self.incidence_tol(),
            None => false,
        }
    }

    pub fn has_plane(&self, p: &PlaneRef) -> bool {
        self.planes.contains(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn l(s: &str) -> Label {
        Label::from(s)
    }

    fn tri() -> Scene {
        Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("B", &[4.0, 0.0])
            .point("C", &[0.0, 3.0])
            .segment("AB")
            .segment("BC")
            .segment("AC")
            .build()
            .unwrap()
    }

    #[test]
    fn lengths() {
        let s = Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[3.0, 4.0]).build().unwrap();
        assert_eq!(s.segment_length(&Segment::from("AB")).unwrap(), 5.0);
        let s = Scene::builder(3).point("A", &[0.0, 0.0, 0.0]).point("B", &[1.0, 2.0, 2.0]).build().unwrap();
        assert_eq!(s.segment_length(&Segment::from("AB")).unwrap(), 3.0);
    }

    #[test]
    fn tiny_segment_not_snapped() {
        let s = Scene::builder(2).point("A", &[1.0, 1.0]).point("B", &[1.0, 1.0 + 1e-9]).build().unwrap();
        let len = s.segment_length(&Segment::from("AB")).unwrap();
        assert!(len > 0.0 && ((len - 1e-9) / 1e-9).abs() < 1e-6);
    }

    #[test]
    fn angles() {
        let s = Scene::builder(2)
            .point("O", &[0.0, 0.0])
            .point("X", &[1.0, 0.0])
            .point("Y", &[0.0, 1.0])
            .point("Z", &[-1.0, 1.0])
            .build()
            .unwrap();
        let (o, x, y, z) = (l("O"), l("X"), l("Y"), l("Z"));
        assert!((s.angle_at(&o, &x, &y).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(s.angle_at(&o, &x, &x).unwrap(), 0.0);
        assert!((s.angle_at(&o, &x, &z).unwrap() - 3.0 * PI / 4.0).abs() < 1e-15);
        assert!(matches!(s.angle_at(&o, &o, &x), Err(SceneError::DegenerateAngle(_))));
    }

    #[test]
    fn segment_angles_use_label_direction() {
        let s = Scene::builder(2)
            .point("A", &[0.0, 0.0])
            .point("B", &[1.0, 0.0])
            .point("C", &[1.0, 1.0])
            .point("D", &[0.0, 1.0])
            .point("E", &[2.0, 2.0])
            .build()
            .unwrap();
        // DC runs C→D, i.e. along -x.
        assert!((s.segment_angle(&"AB".into(), &"CD".into()).unwrap() - PI).abs() < 1e-15);
        assert!((s.segment_angle(&"AB".into(), &"AD".into()).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((s.segment_angle(&"AB".into(), &"AE".into()).unwrap() - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn angle_enumeration() {
        assert_eq!(tri().enumerate_angles().len(), 3);
        let one = Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[1.0, 0.0]).segment("AB").build().unwrap();
        assert!(one.enumerate_angles().is_empty());
        let star = Scene::builder(2)
            .point("O", &[0.0, 0.0])
            .point("A", &[1.0, 0.0])
            .point("B", &[0.0, 1.0])
            .point("C", &[-1.0, 0.0])
            .segment("OA")
            .segment("OB")
            .segment("OC")
            .build()
            .unwrap();
        let angles = star.enumerate_angles();
        assert_eq!(angles.len(), 3);
        assert!(angles.iter().all(|a| a.vertex == l("O")));
    }

    #[test]
    fn validation_errors() {
        let dup = Scene::builder(2).point("A", &[0.0, 0.0]).point("A", &[1.0, 0.0]).build();
        assert_eq!(dup.unwrap_err(), SceneError::DuplicateLabel(l("A")));
        let coincide =
            Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[5.0, 0.0]).point("C", &[0.0, 0.0]).build();
        assert!(matches!(coincide, Err(SceneError::CoincidentPoints(..))));
        let unknown = Scene::builder(2).point("A", &[0.0, 0.0]).segment("AB").build();
        assert_eq!(unknown.unwrap_err(), SceneError::UnknownPoint(l("B")));
        let twice =
            Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[1.0, 0.0]).segment("AB").segment("BA").build();
        assert!(matches!(twice, Err(SceneError::DuplicateSegment(_))));
        let flat = Scene::builder(3)
            .point("A", &[0.0, 0.0, 0.0])
            .point("B", &[1.0, 0.0, 0.0])
            .point("C", &[2.0, 0.0, 0.0])
            .plane(PlaneRef::new(["A", "B", "C"]))
            .build();
        assert!(matches!(flat, Err(SceneError::DegeneratePlane(_))));
        let radius = Scene::builder(2)
            .point("O", &[0.0, 0.0])
            .circle(Circle { name: "o".into(), def: CircleDef::Center { center: l("O"), radius: 0.0 } })
            .build();
        assert!(matches!(radius, Err(SceneError::NonPositiveRadius(_))));
        assert_eq!(Scene::builder(2).build().unwrap_err(), SceneError::Empty);
    }

    #[test]
    fn facts_are_canonical() {
        assert_eq!(Fact::parallel("DC", "BA"), Fact::parallel("AB", "CD"));
        assert_eq!(Fact::collinear(["C", "A", "B", "A"]), Fact::Collinear(vec![l("A"), l("B"), l("C")]));
        let raw = Fact::Parallel(Segment::from("CD"), Segment::from("AB"));
        assert_eq!(raw.canonical(), Fact::parallel("AB", "CD"));
        let json = serde_json::to_string(&Fact::midpoint("E", "AB")).unwrap();
        assert_eq!(json, r#"{"midpoint":["E",["A","B"]]}"#);
        let back: Fact = serde_json::from_str(r#"{"parallel":[["D","C"],["B","A"]]}"#).unwrap();
        assert_eq!(back.canonical(), Fact::parallel("AB", "CD"));
    }

    #[test]
    fn conclusion_points_include_witness_hosts() {
        let s =
            Scene::builder(2).point("A", &[0.0, 0.0]).point("B", &[2.0, 0.0]).point("C", &[0.0, 2.0]).build().unwrap();
        let c = Conclusion::new(Fact::parallel("AF", "BC")).with_witness("F", "AB");
        c.validate(&s).unwrap();
        let pts: Vec<_> = c.points(&s).into_iter().collect();
        assert_eq!(pts, vec![l("A"), l("B"), l("C")]);
        let bad = Conclusion::new(Fact::parallel("AG", "BC"));
        assert_eq!(bad.validate(&s).unwrap_err(), SceneError::UnknownPoint(l("G")));
    }

    #[test]
    fn extension_leaves_original_intact() {
        let s = tri();
        let mut b = s.to_builder();
        b.add_point(l("M"), Vec3::new(2.0, 0.0, 0.0), Origin::Auxiliary);
        let t = b.build().unwrap();
        assert_eq!(s.points().len(), 3);
        assert_eq!(t.points().len(), 4);
    }
}
