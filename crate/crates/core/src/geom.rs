//! Small fixed-size vector helpers. Planar scenes keep `z = 0`.

use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Vec3([b * z - c * y, c * x - a * z, a * y - b * x])
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn midpoint(self, o: Vec3) -> Vec3 {
        (self + o) * 0.5
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
}

/// Angle between two nonzero vectors in `[0, π]`.
///
/// Uses `atan2(|u×v|, u·v)`, which stays accurate near 0 and π where `acos`
/// loses half the mantissa.
pub fn vector_angle(u: Vec3, v: Vec3) -> f64 {
    let c = u.cross(v).norm();
    let d = u.dot(v);
    c.atan2(d).clamp(0.0, std::f64::consts::PI)
}

/// Sine of the angle at `a` between `b - a` and `c - a`; zero means collinear.
pub fn collinearity_sine(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let u = b - a;
    let v = c - a;
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return 0.0;
    }
    u.cross(v).norm() / denom
}

/// Relative tolerance used for "exact" incidence checks (collinearity,
/// coplanarity, betweenness) on coordinates.
pub const INCIDENCE_EPS: f64 = 1e-9;

pub fn collinear(a: Vec3, b: Vec3, c: Vec3) -> bool {
    // Each pair is measured from the point farthest from the others so that a
    // point sitting on top of another does not make the test vacuous.
    collinearity_sine(a, b, c) <= INCIDENCE_EPS
        && collinearity_sine(b, a, c) <= INCIDENCE_EPS
        && collinearity_sine(c, a, b) <= INCIDENCE_EPS
}

/// Signed distance of `p` from the plane through `a, b, c` (zero if degenerate).
pub fn plane_distance(a: Vec3, b: Vec3, c: Vec3, p: Vec3) -> f64 {
    let n = (b - a).cross(c - a);
    let len = n.norm();
    if len == 0.0 {
        return 0.0;
    }
    (p - a).dot(n) / len
}

/// Orthogonal projection of `p` onto the plane through `a, b, c`.
pub fn project_to_plane(a: Vec3, b: Vec3, c: Vec3, p: Vec3) -> Vec3 {
    let n = (b - a).cross(c - a);
    let len = n.norm();
    let unit = n * (1.0 / len);
    p - unit * (p - a).dot(unit)
}

/// Foot of the perpendicular from `p` to the line `a b`, and its parameter
/// `t` along `a → b` (0 at `a`, 1 at `b`).
pub fn foot_on_line(a: Vec3, b: Vec3, p: Vec3) -> (Vec3, f64) {
    let d = b - a;
    let t = (p - a).dot(d) / d.dot(d);
    (a + d * t, t)
}

/// Intersection of lines `a b` and `c d` when they are coplanar and not
/// parallel. Returns the point and the parameters along each line.
pub fn line_intersection(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Option<(Vec3, f64, f64)> {
    let u = b - a;
    let v = d - c;
    let w = c - a;
    let n = u.cross(v);
    let nn = n.dot(n);
    let scale = u.norm() * v.norm();
    if nn.sqrt() <= INCIDENCE_EPS * scale {
        return None;
    }
    // Coplanarity: the offset between the lines must lie in span(u, v).
    if w.dot(n).abs() / nn.sqrt() > INCIDENCE_EPS * (1.0 + w.norm()) {
        return None;
    }
    let s = w.cross(v).dot(n) / nn;
    let t = w.cross(u).dot(n) / nn;
    Some((a + u * s, s, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn angle_between_axes() {
        let a = vector_angle(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        assert!((a - PI / 2.0).abs() < 1e-15);
        assert_eq!(vector_angle(Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn crossing_lines_meet() {
        let (p, s, t) = line_intersection(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(3.0, -1.0, 0.0),
            Vec3::new(3.0, 1.0, 0.0),
        )
        .unwrap();
        assert!((p.0[0] - 3.0).abs() < 1e-12 && p.0[1].abs() < 1e-12);
        assert!((s - 3.0).abs() < 1e-12);
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn skew_lines_do_not_meet() {
        let r = line_intersection(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(0.0, 2.0, 1.0),
        );
        assert!(r.is_none());
    }
}
