//! Scene model: shapes with scale, workspace bounds, occupancy grids, and
//! fixed-layout scene description files.

mod geometry;
mod grid;

pub use geometry::{
    closest_on_poly_boundary, closest_on_segment, point_in_convex, signed_distance_circle_poly,
    signed_distance_point_poly, signed_distance_poly_poly, wrap_angle, ConvexPoly, Footprint,
    Pose2D, Vec2, CONTACT_SLOP,
};
pub use grid::{decompose_patches, rasterize, write_pgm, OccupancyGrid, PatchSet, PATCH_SIZE};

use crate::error::Result;
use serde::{Deserialize, Serialize};

/// Shape geometry in the body frame, before the scale multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeKind {
    Circle { radius: f64 },
    /// Convex, counter-clockwise vertices.
    Polygon { vertices: Vec<Vec2> },
    /// Union of convex CCW parts (concave outlines built from rectangles).
    Composite { parts: Vec<Vec<Vec2>> },
}

/// A body-frame shape with a uniform scale multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub scale: f64,
}

impl ShapeSpec {
    pub fn circle(radius: f64) -> Self {
        ShapeSpec {
            kind: ShapeKind::Circle { radius },
            scale: 1.0,
        }
    }

    /// Axis-aligned rectangle of the given full side lengths, centered at the
    /// body origin.
    pub fn rectangle(width: f64, height: f64) -> Self {
        let (hw, hh) = (width / 2.0, height / 2.0);
        ShapeSpec {
            kind: ShapeKind::Polygon {
                vertices: vec![
                    Vec2::new(-hw, -hh),
                    Vec2::new(hw, -hh),
                    Vec2::new(hw, hh),
                    Vec2::new(-hw, hh),
                ],
            },
            scale: 1.0,
        }
    }

    pub fn composite(parts: Vec<Vec<Vec2>>) -> Self {
        ShapeSpec {
            kind: ShapeKind::Composite { parts },
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// World-space footprint at `pose` with the scale multiplier applied.
    pub fn footprint(&self, pose: &Pose2D) -> Footprint {
        let s = self.scale;
        match &self.kind {
            ShapeKind::Circle { radius } => Footprint::Circle {
                center: pose.position(),
                radius: radius * s,
            },
            ShapeKind::Polygon { vertices } => {
                Footprint::Polys(vec![transform_part(vertices, s, pose)])
            }
            ShapeKind::Composite { parts } => Footprint::Polys(
                parts
                    .iter()
                    .map(|part| transform_part(part, s, pose))
                    .collect(),
            ),
        }
    }

    /// Area centroid in the body frame (scale leaves it fixed up to scaling).
    pub fn centroid(&self) -> Vec2 {
        match &self.kind {
            ShapeKind::Circle { .. } => Vec2::ZERO,
            ShapeKind::Polygon { vertices } => poly_centroid(vertices).0 * self.scale,
            ShapeKind::Composite { parts } => {
                let mut area_sum = 0.0;
                let mut weighted = Vec2::ZERO;
                for part in parts {
                    let (c, a) = poly_centroid(part);
                    area_sum += a;
                    weighted = weighted + c * a;
                }
                if area_sum.abs() < 1e-24 {
                    Vec2::ZERO
                } else {
                    weighted * (self.scale / area_sum)
                }
            }
        }
    }

    /// Footprint area with the scale applied.
    pub fn area(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match &self.kind {
            ShapeKind::Circle { radius } => std::f64::consts::PI * radius * radius * s2,
            ShapeKind::Polygon { vertices } => poly_centroid(vertices).1 * s2,
            ShapeKind::Composite { parts } => {
                parts.iter().map(|p| poly_centroid(p).1).sum::<f64>() * s2
            }
        }
    }

    /// Mean distance from the centroid over the footprint interior, computed
    /// by sampling a fixed grid over the bounding box. Used as the torque
    /// normalization length of the pushing model.
    pub fn mean_centroid_distance(&self) -> f64 {
        if let ShapeKind::Circle { radius } = &self.kind {
            // Exact: mean of r over a disc is 2R/3.
            return 2.0 * radius * self.scale / 3.0;
        }
        let fp = self.footprint(&Pose2D::default());
        let centroid = self.centroid();
        let (lo, hi) = fp.aabb();
        const N: usize = 200;
        let dx = (hi.x - lo.x) / N as f64;
        let dy = (hi.y - lo.y) / N as f64;
        let mut sum = 0.0;
        let mut count = 0u64;
        for i in 0..N {
            for j in 0..N {
                let p = Vec2::new(lo.x + (i as f64 + 0.5) * dx, lo.y + (j as f64 + 0.5) * dy);
                if fp.contains(p) {
                    sum += (p - centroid).norm();
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

fn transform_part(part: &[Vec2], scale: f64, pose: &Pose2D) -> ConvexPoly {
    part.iter().map(|&v| pose.transform(v * scale)).collect()
}

/// CCW shoelace centroid and area of one convex part.
fn poly_centroid(poly: &[Vec2]) -> (Vec2, f64) {
    let n = poly.len();
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let w = a.cross(b);
        area2 += w;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    let area = area2 / 2.0;
    if area.abs() < 1e-24 {
        return (poly[0], 0.0);
    }
    (Vec2::new(cx / (3.0 * area2), cy / (3.0 * area2)), area)
}

/// Rectangular workspace with its lower-left corner at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub origin: Vec2,
    pub width: f64,
    pub height: f64,
    /// Grid cell edge length in meters.
    pub resolution: f64,
}

impl Workspace {
    /// Desk workspace matching the default occupancy grid (140 x 100 cells at 5 mm).
    pub fn default_desk() -> Self {
        Workspace {
            origin: Vec2::ZERO,
            width: 0.70,
            height: 0.50,
            resolution: 0.005,
        }
    }

    pub fn rows(&self) -> usize {
        (self.height / self.resolution).round() as usize
    }

    pub fn cols(&self) -> usize {
        (self.width / self.resolution).round() as usize
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.origin.x + self.width / 2.0, self.origin.y + self.height / 2.0)
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        p.x >= self.origin.x
            && p.x <= self.origin.x + self.width
            && p.y >= self.origin.y
            && p.y <= self.origin.y + self.height
    }

    /// True when the entire footprint lies inside the bounds (touching the
    /// boundary from inside counts as outside-safe only strictly within).
    pub fn contains_footprint(&self, fp: &Footprint) -> bool {
        let (lo, hi) = fp.aabb();
        lo.x > self.origin.x
            && lo.y > self.origin.y
            && hi.x < self.origin.x + self.width
            && hi.y < self.origin.y + self.height
    }
}

/// A static obstacle: shape, pose, and optional velocity for moving obstacles
/// (meters per second; motion is along the velocity with boundary reflection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: ShapeSpec,
    pub pose: Pose2D,
    #[serde(default)]
    pub velocity: Vec2,
}

impl Obstacle {
    pub fn footprint(&self) -> Footprint {
        self.shape.footprint(&self.pose)
    }

    pub fn is_dynamic(&self) -> bool {
        self.velocity.norm_sq() > 0.0
    }
}

/// Fixed scene layout, serializable to JSON for evaluation suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub workspace: Workspace,
    pub obstacles: Vec<Obstacle>,
}

impl SceneDescription {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
