//! Planar geometry primitives shared by the generators, the simulator and the planners.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Rotates by `angle` radians counter-clockwise.
    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
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

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Robot pose in the world frame. `theta` is kept in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Line segment between two points. Used for boundary walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn translated(&self, by: Vec2) -> Self {
        Self::new(self.a + by, self.b + by)
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        let t = if len2 > 0.0 {
            ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        p.distance(self.a + ab * t)
    }

    /// Distance along the unit-direction ray to the first intersection, if any.
    pub fn ray_intersect(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        if denom.abs() < 1e-15 {
            return None;
        }
        let w = self.a - origin;
        let t = w.cross(e) / denom;
        let s = w.cross(dir) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&s) {
            Some(t)
        } else {
            None
        }
    }
}

/// Rectangle rotated by `angle` about its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Vec2,
    pub half_extents: Vec2,
    pub angle: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, half_extents: Vec2, angle: f64) -> Self {
        Self {
            center,
            half_extents,
            angle,
        }
    }

    /// Maps a world point into the rectangle's local frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.angle)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let q = self.to_local(p);
        q.x.abs() <= self.half_extents.x && q.y.abs() <= self.half_extents.y
    }

    /// Euclidean distance from `p` to the rectangle; zero when inside.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let q = self.to_local(p);
        let dx = (q.x.abs() - self.half_extents.x).max(0.0);
        let dy = (q.y.abs() - self.half_extents.y).max(0.0);
        dx.hypot(dy)
    }

    pub fn ray_intersect(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let o = self.to_local(origin);
        let d = dir.rotate(-self.angle);
        slab_intersect(o, d, -self.half_extents, self.half_extents)
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let h = self.half_extents;
        [
            Vec2::new(-h.x, -h.y),
            Vec2::new(h.x, -h.y),
            Vec2::new(h.x, h.y),
            Vec2::new(-h.x, h.y),
        ]
        .map(|c| self.center + c.rotate(self.angle))
    }
}

/// Ray vs axis-aligned box. Returns 0 when the origin is inside the box.
pub fn slab_intersect(origin: Vec2, dir: Vec2, lo: Vec2, hi: Vec2) -> Option<f64> {
    let mut t_min = 0.0_f64;
    let mut t_max = f64::INFINITY;
    for (o, d, l, h) in [(origin.x, dir.x, lo.x, hi.x), (origin.y, dir.y, lo.y, hi.y)] {
        if d.abs() < 1e-15 {
            if o < l || o > h {
                return None;
            }
        } else {
            let inv = 1.0 / d;
            let (mut t0, mut t1) = ((l - o) * inv, (h - o) * inv);
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_min = t_min.max(t0);
            t_max = t_max.min(t1);
            if t_min > t_max {
                return None;
            }
        }
    }
    Some(t_min)
}

/// Distance from `p` to the axis-aligned box `[lo, hi]`; zero inside.
pub fn aabb_distance(p: Vec2, lo: Vec2, hi: Vec2) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx.hypot(dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_keeps_half_open_interval() {
        assert_abs_diff_eq!(normalize_angle(PI), PI);
        assert_abs_diff_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(0.5), 0.5);
        assert_abs_diff_eq!(normalize_angle(-0.5 - 4.0 * PI), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn segment_ray_hits_wall_ahead() {
        let wall = Segment::new(Vec2::new(2.0, -10.0), Vec2::new(2.0, 10.0));
        let t = wall.ray_intersect(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(t, 2.0);
        assert!(wall.ray_intersect(Vec2::ZERO, Vec2::new(-1.0, 0.0)).is_none());
    }

    #[test]
    fn rect_distance_and_ray() {
        let r = OrientedRect::new(Vec2::new(3.0, 0.0), Vec2::new(0.5, 0.5), 0.0);
        assert_abs_diff_eq!(r.distance_to(Vec2::ZERO), 2.5);
        assert_abs_diff_eq!(r.ray_intersect(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap(), 2.5);
        assert_eq!(r.ray_intersect(Vec2::new(3.0, 0.0), Vec2::new(1.0, 0.0)), Some(0.0));
        let rotated = OrientedRect::new(Vec2::new(3.0, 0.0), Vec2::new(0.5, 0.5), PI / 4.0);
        let t = rotated.ray_intersect(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(t, 3.0 - 0.5 * 2f64.sqrt(), epsilon = 1e-12);
    }
}
