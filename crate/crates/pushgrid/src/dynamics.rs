//! Quasi-static single-contact pushing.
//!
//! The object moves only while pushed. Its sliding resistance is an
//! ellipsoidal limit surface H(w) = (fx/f_max)^2 + (fy/f_max)^2 +
//! (tau/tau_max)^2 with f_max = mu_d * m * g and tau_max = f_max * c, where c
//! is the mean centroid distance over the footprint. The object twist is
//! proportional to the limit-surface gradient at the applied contact wrench;
//! the wrench itself follows from the contact mode:
//!
//! - sticking: the object's contact point moves exactly with the pusher, and
//!   the required force lies inside the friction cone;
//! - sliding: the force saturates on a friction-cone edge and the pusher
//!   slides tangentially while normal velocities match;
//! - separation: the pusher moves away (or along) the surface; no motion.
//!
//! Integration is explicit with fixed substeps plus a position projection
//! that keeps pusher-object penetration within `CONTACT_EPSILON`.

use crate::scene::{Footprint, Pose2D, ShapeSpec, Vec2};
use serde::{Deserialize, Serialize};

/// Gravitational acceleration, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// Gap threshold for treating pusher and object as in contact, meters.
pub const CONTACT_EPSILON: f64 = 1e-4;

/// Substeps per control step.
pub const SUBSTEPS: usize = 20;

/// Physical parameters of one pushing interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Pusher-object Coulomb friction coefficient.
    pub static_friction: f64,
    /// Object-surface friction coefficient (sets the maximum planar force).
    pub dynamic_friction: f64,
    /// Drawn and stored for parity with impact-based engines; the
    /// quasi-static model never bounces, so this value is inert.
    pub restitution: f64,
    /// Object mass, kg.
    pub object_mass: f64,
    /// Torque normalization length of the limit surface: mean distance from
    /// the centroid over the footprint.
    pub limit_surface_c: f64,
}

impl DynamicsParams {
    /// Maximum planar friction force magnitude, N.
    pub fn f_max(&self) -> f64 {
        self.dynamic_friction * self.object_mass * GRAVITY
    }

    /// Maximum friction torque magnitude, N m.
    pub fn tau_max(&self) -> f64 {
        self.f_max() * self.limit_surface_c
    }
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            static_friction: 0.6,
            dynamic_friction: 0.3,
            restitution: 0.5,
            object_mass: 0.5,
            limit_surface_c: 0.03,
        }
    }
}

/// Planar twist: linear velocity plus angular rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist2D {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist2D {
    pub const ZERO: Twist2D = Twist2D {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    /// Velocity of a world point rigidly attached to the object, where `arm`
    /// is the point minus the rotation center.
    pub fn point_velocity(&self, arm: Vec2) -> Vec2 {
        self.linear() + arm.perp() * self.omega
    }
}

/// Contact interaction regime for one substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactMode {
    Sticking,
    /// Pusher slides along +tangent relative to the object; friction acts at
    /// the +tangent cone edge.
    SlidingPos,
    /// Mirror case along -tangent.
    SlidingNeg,
    Separation,
}

/// Pusher-object contact geometry. The normal is a unit vector pointing into
/// the object; `gap` is negative when interpenetrating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: Vec2,
    pub normal: Vec2,
    pub gap: f64,
    pub mode: ContactMode,
}

/// The two bodies of the pushing interaction (shapes fixed over an episode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushSetup {
    pub pusher_radius: f64,
    pub object_shape: ShapeSpec,
    pub params: DynamicsParams,
}

/// Mutable pose state advanced by [`step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushState {
    pub pusher_pos: Vec2,
    pub object_pose: Pose2D,
}

/// Closest point on a footprint boundary to `p` (exact for convex shapes;
/// for composites, nearest among part boundaries).
fn closest_boundary_point(fp: &Footprint, p: Vec2) -> Vec2 {
    match fp {
        Footprint::Circle { center, radius } => {
            let dir = (p - *center).unit().unwrap_or(Vec2::new(1.0, 0.0));
            *center + dir * *radius
        }
        Footprint::Polys(parts) => {
            let mut best = crate::scene::closest_on_poly_boundary(p, &parts[0]);
            let mut best_d = (p - best).norm_sq();
            for part in &parts[1..] {
                let q = crate::scene::closest_on_poly_boundary(p, part);
                let d = (p - q).norm_sq();
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
            best
        }
    }
}

/// Find the pusher-object contact if the gap is within `CONTACT_EPSILON`.
/// The returned mode is `Separation` until classified against a velocity.
pub fn find_contact(
    pusher_pos: Vec2,
    pusher_radius: f64,
    object_shape: &ShapeSpec,
    object_pose: &Pose2D,
) -> Option<Contact> {
    let fp = object_shape.footprint(object_pose);
    let q = closest_boundary_point(&fp, pusher_pos);
    let delta = q - pusher_pos;
    let dist = delta.norm();
    let inside = fp.contains(pusher_pos);
    let (gap, normal) = if inside {
        // Deep penetration: the inward direction continues past the boundary.
        let n = (pusher_pos - q).unit().unwrap_or(Vec2::new(1.0, 0.0));
        (-(dist + pusher_radius), n)
    } else {
        let n = delta.unit().unwrap_or(Vec2::new(1.0, 0.0));
        (dist - pusher_radius, n)
    };
    if gap <= CONTACT_EPSILON {
        Some(Contact {
            point: q,
            normal,
            gap,
            mode: ContactMode::Separation,
        })
    } else {
        None
    }
}

/// Body twist from the limit-surface gradient at a contact wrench. `center`
/// is the object centroid (torque reference). The quasi-static model fixes
/// only the twist direction; this returns the gradient scaled by 1/f_max^2
/// (so v = f/f_max^2, omega = tau/tau_max^2), and zero wrench gives zero
/// twist.
pub fn limit_surface_twist(
    force: Vec2,
    contact_point: Vec2,
    center: Vec2,
    params: &DynamicsParams,
) -> Twist2D {
    let f_max_sq = params.f_max() * params.f_max();
    let tau_max_sq = params.tau_max() * params.tau_max();
    let torque = (contact_point - center).cross(force);
    Twist2D {
        vx: force.x / f_max_sq,
        vy: force.y / f_max_sq,
        omega: torque / tau_max_sq,
    }
}

/// Result of resolving one contact against a pusher velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushSolution {
    pub mode: ContactMode,
    /// Object twist about its centroid (zero for separation).
    pub twist: Twist2D,
    /// Contact force on the object in quasi-static units (zero for
    /// separation). Its direction is physical; its magnitude carries the
    /// kinematic scale of the twist.
    pub force: Vec2,
}

/// Classify the contact mode and solve for the object twist.
///
/// `center` is the object centroid in world coordinates. Writing rho for the
/// perpendicular of the contact arm and c for the torque length, the
/// limit-surface map from force to contact-point velocity is
/// A = I + rho rho^T / c^2; sticking requires A^-1 u inside the friction
/// cone, otherwise the force saturates on the cone edge whose sign matches
/// the required tangential force.
pub fn solve_push(
    contact: &Contact,
    pusher_vel: Vec2,
    center: Vec2,
    params: &DynamicsParams,
) -> PushSolution {
    let n = contact.normal;
    let u_n = pusher_vel.dot(n);
    // Separation when the pusher velocity has a non-negative component along
    // the outward normal (-n).
    if u_n <= 0.0 {
        return PushSolution {
            mode: ContactMode::Separation,
            twist: Twist2D::ZERO,
            force: Vec2::ZERO,
        };
    }
    let t = n.perp();
    let arm = contact.point - center;
    let rho = arm.perp();
    let c_sq = params.limit_surface_c * params.limit_surface_c;
    let mu = params.static_friction;

    // f_req = A^-1 u via Sherman-Morrison.
    let scale = rho.dot(pusher_vel) / (c_sq + rho.norm_sq());
    let f_req = pusher_vel - rho * scale;
    let f_n = f_req.dot(n);
    let f_t = f_req.dot(t);

    if f_n > 0.0 && f_t.abs() <= mu * f_n {
        // Sticking: the contact point follows the pusher exactly.
        let omega = arm.cross(f_req) / c_sq;
        return PushSolution {
            mode: ContactMode::Sticking,
            twist: Twist2D {
                vx: f_req.x,
                vy: f_req.y,
                omega,
            },
            force: f_req,
        };
    }

    // Sliding: force on the cone edge matching the required tangential sign.
    let sigma = if f_t >= 0.0 { 1.0 } else { -1.0 };
    let f_edge = n + t * (sigma * mu);
    let w = f_edge + rho * (rho.dot(f_edge) / c_sq); // A f_edge
    let denom = w.dot(n);
    if denom <= 1e-12 {
        // Degenerate geometry: no consistent pushing solution; treat as
        // separation rather than extrapolate.
        return PushSolution {
            mode: ContactMode::Separation,
            twist: Twist2D::ZERO,
            force: Vec2::ZERO,
        };
    }
    let s = u_n / denom;
    let g = f_edge * s;
    let omega = arm.cross(g) / c_sq;
    PushSolution {
        mode: if sigma > 0.0 {
            ContactMode::SlidingPos
        } else {
            ContactMode::SlidingNeg
        },
        twist: Twist2D {
            vx: g.x,
            vy: g.y,
            omega,
        },
        force: g,
    }
}

/// World centroid of the object.
pub fn object_center(setup: &PushSetup, pose: &Pose2D) -> Vec2 {
    pose.transform(setup.object_shape.centroid())
}

/// What happened over one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Classified contact from the final substep, if any.
    pub last_contact: Option<Contact>,
    /// True when any substep had pusher-object contact.
    pub any_contact: bool,
}

/// Advance one control step of length `dt` with `substeps` fixed substeps.
/// The pusher is kinematic; the object moves only through contact.
pub fn step_with_substeps(
    setup: &PushSetup,
    state: &mut PushState,
    pusher_vel: Vec2,
    dt: f64,
    substeps: usize,
) -> StepReport {
    let h = dt / substeps as f64;
    let mut last_contact = None;
    let mut any_contact = false;
    for _ in 0..substeps {
        state.pusher_pos = state.pusher_pos + pusher_vel * h;
        let contact = find_contact(
            state.pusher_pos,
            setup.pusher_radius,
            &setup.object_shape,
            &state.object_pose,
        );
        if let Some(mut c) = contact {
            any_contact = true;
            let center = object_center(setup, &state.object_pose);
            let solution = solve_push(&c, pusher_vel, center, &setup.params);
            c.mode = solution.mode;
            if solution.mode != ContactMode::Separation {
                let tw = solution.twist;
                state.object_pose = Pose2D::new(
                    state.object_pose.x + tw.vx * h,
                    state.object_pose.y + tw.vy * h,
                    state.object_pose.theta + tw.omega * h,
                );
            }
            // Projection: rotation and discrete stepping can leave a small
            // overlap; translate the object out along the contact normal.
            if let Some(after) = find_contact(
                state.pusher_pos,
                setup.pusher_radius,
                &setup.object_shape,
                &state.object_pose,
            ) {
                if after.gap < 0.0 {
                    let push_out = after.normal * (-after.gap);
                    state.object_pose = Pose2D::new(
                        state.object_pose.x + push_out.x,
                        state.object_pose.y + push_out.y,
                        state.object_pose.theta,
                    );
                }
            }
            last_contact = Some(c);
        } else {
            last_contact = None;
        }
    }
    StepReport {
        last_contact,
        any_contact,
    }
}

/// [`step_with_substeps`] at the standard substep count.
pub fn step(setup: &PushSetup, state: &mut PushState, pusher_vel: Vec2, dt: f64) -> StepReport {
    step_with_substeps(setup, state, pusher_vel, dt, SUBSTEPS)
}
