//! Planar angle and vector primitives.
//!
//! Conventions: meters, radians, counter-clockwise positive. A negative
//! relative angle therefore points to starboard.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two line directions whose `|sin(Δ)|` is below this are parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-9;

/// Wraps an angle into `[-π, π)`.
pub fn wrap(alpha: f64) -> f64 {
    if (-PI..PI).contains(&alpha) {
        return alpha;
    }
    let wrapped = (alpha + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

/// Heading or bearing, always stored wrapped.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn new(rad: f64) -> Self {
        Angle(wrap(rad))
    }

    pub fn from_degrees(deg: f64) -> Self {
        Angle::new(deg.to_radians())
    }

    #[inline]
    pub fn rad(self) -> f64 {
        self.0
    }

    /// Shortest signed arc from `other` to `self`.
    pub fn diff(self, other: Angle) -> f64 {
        wrap(self.0 - other.0)
    }

    pub fn unit(self) -> Vec2 {
        rad2vec(self)
    }
}

impl From<f64> for Angle {
    fn from(rad: f64) -> Self {
        Angle::new(rad)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> Self {
        a.0
    }
}

impl Add<f64> for Angle {
    type Output = Angle;
    fn add(self, rhs: f64) -> Angle {
        Angle::new(self.0 + rhs)
    }
}

impl Sub<f64> for Angle {
    type Output = Angle;
    fn sub(self, rhs: f64) -> Angle {
        Angle::new(self.0 - rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Rotates by `alpha` counter-clockwise.
    pub fn rotate(self, alpha: f64) -> Vec2 {
        let (s, c) = alpha.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Line through `point` along `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2 {
    pub point: Vec2,
    pub direction: Angle,
}

impl Line2 {
    pub fn new(point: Vec2, direction: Angle) -> Self {
        Line2 { point, direction }
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.direction.unit().cross(p - self.point).abs()
    }
}

/// Unit vector pointing along `alpha`.
pub fn rad2vec(alpha: Angle) -> Vec2 {
    let (s, c) = alpha.rad().sin_cos();
    Vec2::new(c, s)
}

/// Orientation of the vector `p1 - p2`.
pub fn vec2rad(p1: Vec2, p2: Vec2) -> Result<Angle> {
    let d = p1 - p2;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(Error::Degenerate("vec2rad of coincident points"));
    }
    Ok(Angle::new(d.y.atan2(d.x)))
}

/// Orthogonal projection of `x` onto the span of `y`.
pub fn orthop(x: Vec2, y: Vec2) -> Result<Vec2> {
    let yy = y.dot(y);
    if yy == 0.0 {
        return Err(Error::Degenerate("orthop onto the zero vector"));
    }
    Ok(y * (x.dot(y) / yy))
}

/// Intersection point of two lines, or the origin when they are parallel.
pub fn intersect(g1: &Line2, g2: &Line2) -> Vec2 {
    let d1 = g1.direction.unit();
    let d2 = g2.direction.unit();
    let denom = d1.cross(d2);
    if denom.abs() < PARALLEL_TOLERANCE {
        return Vec2::ZERO;
    }
    // g1.point + t d1 = g2.point + s d2
    let t = (g2.point - g1.point).cross(d2) / denom;
    g1.point + d1 * t
}

/// Half-space membership: `rad2vec(beta_h) · p - b <= 0`.
pub fn in_h(p: Vec2, beta_h: Angle, b: f64) -> bool {
    rad2vec(beta_h).dot(p) - b <= 0.0
}

/// Summed Euclidean length of a sampled path.
pub fn path_length(points: &[Vec2]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Degenerate("path_length of an empty sequence"));
    }
    Ok(points.windows(2).map(|w| w[1].distance(w[0])).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn rad2vec_examples() {
        let v = rad2vec(Angle::new(0.0));
        assert_eq!((v.x, v.y), (1.0, 0.0));
        let v = rad2vec(Angle::new(FRAC_PI_2));
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 1.0, epsilon = 1e-15);
        let v = rad2vec(Angle::new(FRAC_PI_4));
        assert_abs_diff_eq!(v.x, 0.70711, epsilon = 1e-5);
        assert_abs_diff_eq!(v.y, 0.70711, epsilon = 1e-5);
    }

    #[test]
    fn vec2rad_examples() {
        let a = vec2rad(Vec2::new(0.0, 1.0), Vec2::ZERO).unwrap();
        assert_abs_diff_eq!(a.rad(), FRAC_PI_2, epsilon = 1e-15);
        // atan2 yields +π here; the wrapped representative is −π.
        let a = vec2rad(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(a.rad().abs(), PI, epsilon = 1e-15);
        let a = vec2rad(Vec2::new(1.0, 1.0), Vec2::ZERO).unwrap();
        assert_abs_diff_eq!(a.rad(), FRAC_PI_4, epsilon = 1e-15);
        assert!(vec2rad(Vec2::new(3.0, 3.0), Vec2::new(3.0, 3.0)).is_err());
    }

    #[test]
    fn orthop_examples() {
        let p = orthop(Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(p, Vec2::new(1.0, 0.0));
        let p = orthop(Vec2::new(2.0, 3.0), Vec2::new(2.0, 3.0)).unwrap();
        assert_abs_diff_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 3.0, epsilon = 1e-12);
        let p = orthop(Vec2::new(3.0, 4.0), Vec2::new(0.0, 2.0)).unwrap();
        assert_eq!(p, Vec2::new(0.0, 4.0));
        assert!(orthop(Vec2::new(1.0, 0.0), Vec2::ZERO).is_err());
    }

    #[test]
    fn intersect_examples() {
        let x_axis = Line2::new(Vec2::ZERO, Angle::new(0.0));
        let y_axis = Line2::new(Vec2::ZERO, Angle::new(FRAC_PI_2));
        let p = intersect(&x_axis, &y_axis);
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);

        let upper = Line2::new(Vec2::new(0.0, 1.0), Angle::new(0.0));
        assert_eq!(intersect(&x_axis, &upper), Vec2::ZERO);

        // Oracle: (t, t) = (2, s) => t = 2.
        let diag = Line2::new(Vec2::ZERO, Angle::new(FRAC_PI_4));
        let vert = Line2::new(Vec2::new(2.0, 0.0), Angle::new(FRAC_PI_2));
        let p = intersect(&diag, &vert);
        assert_abs_diff_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn in_h_examples() {
        assert!(in_h(Vec2::new(-1.0, 0.0), Angle::ZERO, 0.0));
        assert!(!in_h(Vec2::new(1.0, 0.0), Angle::ZERO, 0.0));
        assert!(in_h(Vec2::new(1.0, 0.0), Angle::ZERO, 2.0));
    }

    #[test]
    fn path_length_examples() {
        assert_eq!(path_length(&[Vec2::ZERO]).unwrap(), 0.0);
        assert_eq!(path_length(&[Vec2::ZERO, Vec2::new(3.0, 4.0)]).unwrap(), 5.0);
        let p = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)];
        assert_eq!(path_length(&p).unwrap(), 2.0);
        assert!(path_length(&[]).is_err());
    }

    #[test]
    fn angle_diff_is_shortest_arc() {
        let a = Angle::new(PI - 0.1);
        let b = Angle::new(-PI + 0.1);
        assert_abs_diff_eq!(b.diff(a), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(a.diff(b), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn wrap_prefers_minus_pi() {
        assert_eq!(wrap(PI), -PI);
        assert_eq!(wrap(-PI), -PI);
        assert_eq!(wrap(3.0 * PI), -PI);
    }

    fn vec2() -> impl Strategy<Value = Vec2> {
        (-1e4..1e4f64, -1e4..1e4f64).prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(a in -1e3..1e3f64) {
            let w = wrap(a);
            prop_assert!((-PI..PI).contains(&w));
            prop_assert_eq!(wrap(w), w);
        }

        #[test]
        fn rad2vec_is_unit(a in -10.0..10.0f64) {
            prop_assert!((rad2vec(Angle::new(a)).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn orthop_residual_is_perpendicular(x in vec2(), y in vec2()) {
            prop_assume!(y.norm() > 1e-3);
            let r = x - orthop(x, y).unwrap();
            prop_assert!((r.dot(y) / (y.norm() * (1.0 + x.norm()))).abs() < 1e-9);
        }

        #[test]
        fn intersection_lies_on_both_lines(
            p1 in vec2(), p2 in vec2(), a1 in -PI..PI, a2 in -PI..PI
        ) {
            let g1 = Line2::new(p1, Angle::new(a1));
            let g2 = Line2::new(p2, Angle::new(a2));
            // keep away from near-parallel lines where the point runs off to infinity
            prop_assume!((a1 - a2).sin().abs() > 1e-3);
            let p = intersect(&g1, &g2);
            let scale = 1.0 + p.norm() * 1e-12;
            prop_assert!(g1.distance_to(p) < 1e-6 * scale);
            prop_assert!(g2.distance_to(p) < 1e-6 * scale);
        }

        #[test]
        fn halfspace_sides_are_exclusive(p in vec2(), beta in -PI..PI) {
            let b = Angle::new(beta);
            prop_assume!(rad2vec(b).dot(p) != 0.0);
            prop_assert!(in_h(p, b, 0.0) ^ in_h(-p, b, 0.0));
        }
    }
}
