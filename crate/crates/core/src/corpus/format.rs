//! JSON problem files. Coordinates are decimal strings so files round-trip
//! exactly; plain JSON numbers are accepted on input.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CorpusError;
use crate::problem::Problem;
use crate::scene::{Circle, Conclusion, Fact, Origin, PlaneRef, Scene, Segment, Witness};

pub const FORMAT: &str = "auxgeo/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    format: String,
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<String>,
    dimension: u8,
    points: Vec<RawPoint>,
    #[serde(default)]
    segments: Vec<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    circles: Vec<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    planes: Vec<Value>,
    #[serde(default)]
    facts: Vec<Value>,
    goal: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    witnesses: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    label: String,
    coords: Vec<Value>,
    #[serde(default, skip_serializing_if = "is_given")]
    origin: Origin,
}

fn is_given(o: &Origin) -> bool {
    *o == Origin::Given
}

fn field<T: serde::de::DeserializeOwned>(v: &Value, path: &str) -> Result<T, CorpusError> {
    serde_json::from_value(v.clone()).map_err(|e| CorpusError::Field { path: path.to_owned(), message: e.to_string() })
}

fn coordinate(v: &Value, path: &str) -> Result<f64, CorpusError> {
    let bad = |m: String| CorpusError::Field { path: path.to_owned(), message: m };
    let x = match v {
        Value::String(s) => s.trim().parse::<f64>().map_err(|_| bad(format!("`{s}` is not a decimal number")))?,
        Value::Number(n) => n.as_f64().ok_or_else(|| bad("number out of range".into()))?,
        other => return Err(bad(format!("expected a decimal string, found {other}"))),
    };
    if !x.is_finite() {
        return Err(bad("coordinate must be finite".into()));
    }
    Ok(x)
}

/// Shortest decimal text that parses back to exactly `x`.
pub fn decimal(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x}")
}

pub fn problem_from_json(text: &str) -> Result<Problem, CorpusError> {
    let raw: RawProblem =
        serde_json::from_str(text).map_err(|e| CorpusError::Field { path: "$".into(), message: e.to_string() })?;
    if raw.format != FORMAT {
        return Err(CorpusError::Field {
            path: "format".into(),
            message: format!("unsupported format `{}` (expected `{FORMAT}`)", raw.format),
        });
    }
    let at = |path: String| {
        move |e: crate::scene::SceneError| CorpusError::Field { path: path.clone(), message: e.to_string() }
    };
    let mut b = Scene::builder(raw.dimension);
    for (i, p) in raw.points.iter().enumerate() {
        let coords: Vec<f64> = p
            .coords
            .iter()
            .enumerate()
            .map(|(k, c)| coordinate(c, &format!("points[{i}].coords[{k}]")))
            .collect::<Result<_, _>>()?;
        b.try_point(p.label.as_str(), &coords, p.origin).map_err(at(format!("points[{i}]")))?;
    }
    for (i, s) in raw.segments.iter().enumerate() {
        b.add_segment(field::<Segment>(s, &format!("segments[{i}]"))?);
    }
    for (i, c) in raw.circles.iter().enumerate() {
        b.add_circle(field::<Circle>(c, &format!("circles[{i}]"))?);
    }
    for (i, p) in raw.planes.iter().enumerate() {
        b.add_plane(field::<PlaneRef>(p, &format!("planes[{i}]"))?);
    }
    for (i, f) in raw.facts.iter().enumerate() {
        b = b.fact(field::<Fact>(f, &format!("facts[{i}]"))?);
    }
    let scene = b.build().map_err(at("scene".into()))?;
    let goal: Fact = field(&raw.goal, "goal")?;
    let mut conclusion = Conclusion::new(goal);
    for (i, w) in raw.witnesses.iter().enumerate() {
        let w: Witness = field(w, &format!("witnesses[{i}]"))?;
        conclusion = conclusion.with_witness(w.label, w.on);
    }
    let mut problem = Problem::new(raw.id, scene, conclusion).map_err(at("goal".into()))?;
    problem.family = raw.family;
    problem.expected = raw.expected;
    Ok(problem)
}

pub fn problem_to_json(p: &Problem) -> String {
    let s = &p.scene;
    let raw = RawProblem {
        format: FORMAT.to_owned(),
        id: p.id.clone(),
        family: p.family.clone(),
        dimension: s.dimension(),
        points: s
            .points()
            .iter()
            .map(|pt| RawPoint {
                label: pt.label.as_str().to_owned(),
                coords: pt.pos.0[..usize::from(s.dimension())].iter().map(|c| Value::String(decimal(*c))).collect(),
                origin: pt.origin,
            })
            .collect(),
        segments: s.segments().iter().map(to_value).collect(),
        circles: s.circles().iter().map(to_value).collect(),
        planes: s.planes().iter().map(to_value).collect(),
        facts: s.facts().iter().map(|(f, _)| to_value(f)).collect(),
        goal: to_value(&p.conclusion.goal),
        witnesses: p.conclusion.witnesses.iter().map(to_value).collect(),
        expected: p.expected.clone(),
    };
    serde_json::to_string_pretty(&raw).expect("problem serializes")
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializes")
}

pub fn load_problem(path: &Path) -> Result<Problem, CorpusError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CorpusError::Io { path: path.display().to_string(), source: e })?;
    problem_from_json(&text).map_err(|e| e.in_file(path))
}

pub fn save_problem(p: &Problem, path: &Path) -> Result<(), CorpusError> {
    std::fs::write(path, problem_to_json(p) + "\n")
        .map_err(|e| CorpusError::Io { path: path.display().to_string(), source: e })
}

/// Every `*.json` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Problem>, CorpusError> {
    let io = |e| CorpusError::Io { path: dir.display().to_string(), source: e };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_problem(p)).collect()
}

/// A single problem file or a directory of them.
pub fn load_problems(path: &Path) -> Result<Vec<Problem>, CorpusError> {
    if path.is_dir() {
        load_dir(path)
    } else {
        Ok(vec![load_problem(path)?])
    }
}
