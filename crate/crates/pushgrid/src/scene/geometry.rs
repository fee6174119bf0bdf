//! 2D vectors, poses, and convex geometry predicates.
//!
//! Conventions: polygons are convex with counter-clockwise vertices; signed
//! distances are positive gaps for disjoint shapes and negative penetration
//! depths for overlapping ones; angles live in (-pi, pi].

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Interpenetration below this depth still counts as touching, not colliding.
pub const CONTACT_SLOP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is CCW of `self`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    /// CCW perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Unit vector; `None` for (near-)zero input.
    pub fn unit(self) -> Option<Vec2> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(Vec2::new(self.x / n, self.y / n))
        }
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
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Planar pose: translation plus heading, heading kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Map a body-frame point into the world frame.
    pub fn transform(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(c * p.x - s * p.y + self.x, s * p.x + c * p.y + self.y)
    }

    /// Rotate a body-frame direction into the world frame (no translation).
    pub fn rotate(&self, v: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }
}

impl Default for Pose2D {
    fn default() -> Self {
        Pose2D::new(0.0, 0.0, 0.0)
    }
}

/// Convex polygon, CCW vertex order, world or body frame depending on context.
pub type ConvexPoly = Vec<Vec2>;

/// A shape placed in the world: either a disc or a union of convex polygons.
#[derive(Debug, Clone)]
pub enum Footprint {
    Circle { center: Vec2, radius: f64 },
    Polys(Vec<ConvexPoly>),
}

/// True when `p` is inside the CCW convex polygon (boundary counts as inside).
pub fn point_in_convex(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (b - a).cross(p - a) < 0.0 {
            return false;
        }
    }
    true
}

/// Closest point to `p` on segment [a, b].
pub fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq < 1e-24 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point to `p` on the polygon boundary.
pub fn closest_on_poly_boundary(p: Vec2, poly: &[Vec2]) -> Vec2 {
    let n = poly.len();
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for i in 0..n {
        let q = closest_on_segment(p, poly[i], poly[(i + 1) % n]);
        let d = (p - q).norm_sq();
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// Distance from `p` to the polygon: positive outside, negative inside.
pub fn signed_distance_point_poly(p: Vec2, poly: &[Vec2]) -> f64 {
    let q = closest_on_poly_boundary(p, poly);
    let d = (p - q).norm();
    if point_in_convex(p, poly) {
        -d
    } else {
        d
    }
}

/// Minimum distance between two segments (0 when they intersect).
pub fn segment_segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    let d1 = (a0 - closest_on_segment(a0, b0, b1)).norm();
    let d2 = (a1 - closest_on_segment(a1, b0, b1)).norm();
    let d3 = (b0 - closest_on_segment(b0, a0, a1)).norm();
    let d4 = (b1 - closest_on_segment(b1, a0, a1)).norm();
    d1.min(d2).min(d3).min(d4)
}

fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d = (a1 - a0).cross(b1 - b0);
    if d.abs() < 1e-18 {
        return false; // parallel; endpoint distances cover touching cases
    }
    let t = (b0 - a0).cross(b1 - b0) / d;
    let u = (b0 - a0).cross(a1 - a0) / d;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

/// SAT overlap of two CCW convex polygons: `Some(depth)` with the minimum
/// translation depth when they overlap, `None` when an axis separates them.
fn sat_penetration(a: &[Vec2], b: &[Vec2]) -> Option<f64> {
    let mut depth = f64::INFINITY;
    for (poly, other) in [(a, b), (b, a)] {
        let n = poly.len();
        for i in 0..n {
            let edge = poly[(i + 1) % n] - poly[i];
            let axis = match edge.perp().unit() {
                Some(u) => u,
                None => continue,
            };
            let (min_a, max_a) = project(poly, axis);
            let (min_b, max_b) = project(other, axis);
            let overlap = max_a.min(max_b) - min_a.max(min_b);
            if overlap < 0.0 {
                return None;
            }
            depth = depth.min(overlap);
        }
    }
    Some(depth)
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in poly {
        let d = v.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Signed distance between convex polygons: Euclidean gap when disjoint,
/// minus the SAT translation depth when overlapping.
pub fn signed_distance_poly_poly(a: &[Vec2], b: &[Vec2]) -> f64 {
    if let Some(depth) = sat_penetration(a, b) {
        return -depth;
    }
    let (na, nb) = (a.len(), b.len());
    let mut best = f64::INFINITY;
    for i in 0..na {
        for j in 0..nb {
            let d = segment_segment_distance(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]);
            best = best.min(d);
        }
    }
    best
}

/// Signed distance between a disc and a convex polygon.
pub fn signed_distance_circle_poly(center: Vec2, radius: f64, poly: &[Vec2]) -> f64 {
    signed_distance_point_poly(center, poly) - radius
}

impl Footprint {
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Footprint::Circle { center, radius } => (p - *center).norm_sq() <= radius * radius,
            Footprint::Polys(parts) => parts.iter().any(|poly| point_in_convex(p, poly)),
        }
    }

    /// Axis-aligned bounding box (min corner, max corner).
    pub fn aabb(&self) -> (Vec2, Vec2) {
        match self {
            Footprint::Circle { center, radius } => (
                Vec2::new(center.x - radius, center.y - radius),
                Vec2::new(center.x + radius, center.y + radius),
            ),
            Footprint::Polys(parts) => {
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for poly in parts {
                    for v in poly {
                        lo.x = lo.x.min(v.x);
                        lo.y = lo.y.min(v.y);
                        hi.x = hi.x.max(v.x);
                        hi.y = hi.y.max(v.y);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Signed distance between footprints (minimum over composite parts).
    pub fn signed_distance(&self, other: &Footprint) -> f64 {
        match (self, other) {
            (
                Footprint::Circle { center: c1, radius: r1 },
                Footprint::Circle { center: c2, radius: r2 },
            ) => (*c1 - *c2).norm() - r1 - r2,
            (Footprint::Circle { center, radius }, Footprint::Polys(parts))
            | (Footprint::Polys(parts), Footprint::Circle { center, radius }) => parts
                .iter()
                .map(|poly| signed_distance_circle_poly(*center, *radius, poly))
                .fold(f64::INFINITY, f64::min),
            (Footprint::Polys(pa), Footprint::Polys(pb)) => {
                let mut best = f64::INFINITY;
                for a in pa {
                    for b in pb {
                        best = best.min(signed_distance_poly_poly(a, b));
                    }
                }
                best
            }
        }
    }

    /// True when the shapes interpenetrate beyond `tolerance` plus the
    /// numeric slop; with tolerance 0, touching does not collide.
    pub fn collides_with(&self, other: &Footprint, tolerance: f64) -> bool {
        self.signed_distance(other) < tolerance - CONTACT_SLOP
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(center: Vec2, half: f64) -> ConvexPoly {
        vec![
            Vec2::new(center.x - half, center.y - half),
            Vec2::new(center.x + half, center.y - half),
            Vec2::new(center.x + half, center.y + half),
            Vec2::new(center.x - half, center.y + half),
        ]
    }

    #[test]
    fn wrap_angle_lands_in_half_open_interval() {
        use std::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn point_in_convex_counts_boundary_as_inside() {
        let sq = square(Vec2::ZERO, 1.0);
        assert!(point_in_convex(Vec2::ZERO, &sq));
        assert!(point_in_convex(Vec2::new(1.0, 0.0), &sq));
        assert!(!point_in_convex(Vec2::new(1.0 + 1e-9, 0.0), &sq));
    }

    #[test]
    fn signed_distance_squares_one_meter_apart() {
        let a = Footprint::Polys(vec![square(Vec2::ZERO, 0.5)]);
        let b = Footprint::Polys(vec![square(Vec2::new(2.0, 0.0), 0.5)]);
        let d = a.signed_distance(&b);
        assert!((d - 1.0).abs() < 1e-12, "d = {d}");
        assert!(!a.collides_with(&b, 0.0));
    }

    #[test]
    fn identical_squares_collide_with_penetration_depth() {
        let a = Footprint::Polys(vec![square(Vec2::ZERO, 0.5)]);
        let d = a.signed_distance(&a.clone());
        assert!((d + 1.0).abs() < 1e-12, "full overlap depth, got {d}");
        assert!(a.collides_with(&a.clone(), 0.0));
    }

    #[test]
    fn small_gap_with_looser_tolerance_collides() {
        // Two unit squares separated by 0.0005 m collide under a 0.001 m tolerance.
        let a = Footprint::Polys(vec![square(Vec2::ZERO, 0.5)]);
        let b = Footprint::Polys(vec![square(Vec2::new(1.0005, 0.0), 0.5)]);
        assert!((a.signed_distance(&b) - 0.0005).abs() < 1e-12);
        assert!(a.collides_with(&b, 0.001));
        assert!(!a.collides_with(&b, 0.0));
    }

    #[test]
    fn circle_poly_distance_matches_hand_value() {
        let c = Footprint::Circle {
            center: Vec2::new(2.0, 0.0),
            radius: 0.25,
        };
        let sq = Footprint::Polys(vec![square(Vec2::ZERO, 0.5)]);
        assert!((c.signed_distance(&sq) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn touching_squares_do_not_collide_at_zero_tolerance() {
        let a = Footprint::Polys(vec![square(Vec2::ZERO, 0.5)]);
        let b = Footprint::Polys(vec![square(Vec2::new(1.0, 0.0), 0.5)]);
        assert!(a.signed_distance(&b).abs() < 1e-12);
        assert!(!a.collides_with(&b, 0.0));
    }
}
