//! Pushing environment: episode sampling, observation noise, reward, and
//! termination. Control runs at 10 Hz over the substepped dynamics.

mod scenario;
mod vec_env;

pub use scenario::{
    free_scenario, named_scenario, training_scenario, ObstacleKind, ObstacleSpec, ScenarioSpec,
    DYNAMIC_OBSTACLE_SPEED, EVAL_MAX_STEPS, EVAL_SCENARIOS, TRAIN_MAX_STEPS,
};
pub use vec_env::{VecEnv, VecStepResult};

use crate::dynamics::{step as dynamics_step, DynamicsParams, PushSetup, PushState};
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::scene::{
    rasterize, wrap_angle, Obstacle, OccupancyGrid, Pose2D, ShapeSpec, Vec2, Workspace,
};
use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Control period, seconds.
pub const STEP_DT: f64 = 0.1;
/// Discrete velocity bins per axis.
pub const VELOCITY_BINS: usize = 11;
/// Lowest bin velocity, m/s.
pub const VELOCITY_MIN: f64 = -0.1;
/// Velocity increment between bins, m/s.
pub const VELOCITY_STEP: f64 = 0.02;

/// Success thresholds.
pub const SUCCESS_POS_TOL: f64 = 0.015;
pub const SUCCESS_ANG_TOL: f64 = std::f64::consts::FRAC_PI_6;

/// Reward constants.
pub const R_SUCCESS: f64 = 50.0;
pub const R_BOUNDARY: f64 = -10.0;
pub const R_COLLISION: f64 = -5.0;
pub const K_DIST: f64 = 0.1;
pub const K_ANG: f64 = 0.02;

/// Observation noise standard deviations (positions m, angles rad).
pub const POS_NOISE_STD: f64 = 0.001;
pub const ANG_NOISE_STD: f64 = 0.02;

/// Physics and scale randomization ranges (uniform draws; midpoint when
/// randomization is off).
pub const STATIC_FRICTION_RANGE: (f64, f64) = (0.5, 0.7);
pub const DYNAMIC_FRICTION_RANGE: (f64, f64) = (0.2, 0.4);
pub const RESTITUTION_RANGE: (f64, f64) = (0.4, 0.6);
pub const OBJECT_MASS_RANGE: (f64, f64) = (0.4, 0.6);
pub const OBJECT_SCALE_RANGE: (f64, f64) = (0.9, 1.1);
pub const PUSHER_SCALE_RANGE: (f64, f64) = (0.95, 1.05);

/// Reset sampling rejection budget per placement.
pub const MAX_SAMPLE_ATTEMPTS: usize = 1000;

/// Obstacle corridor: centroid within this lateral distance of the
/// object-target segment, projection strictly between the endpoints.
pub const CORRIDOR_HALF_WIDTH: f64 = 0.1;
const CORRIDOR_T_RANGE: (f64, f64) = (0.15, 0.85);
/// Minimum object-target separation so an obstacle fits between them.
const MIN_TARGET_DISTANCE: f64 = 0.15;
/// Obstacles keep this clearance from the object footprint placed at the
/// target (success must not force a collision).
const GOAL_CLEARANCE: f64 = 0.02;
/// Initial clearance between sampled bodies.
const SPAWN_CLEARANCE: f64 = 0.005;
/// Dual-obstacle scenarios keep corridor projections this far apart.
const MIN_PROJECTION_GAP: f64 = 0.2;

/// Base body shapes (before per-episode scale draws).
pub fn base_pusher_shape() -> ShapeSpec {
    ShapeSpec::circle(0.01)
}

pub fn base_object_shape() -> ShapeSpec {
    ShapeSpec::rectangle(0.10, 0.06)
}

/// Discrete action: one velocity bin per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub bin_x: usize,
    pub bin_y: usize,
}

impl Action {
    pub fn new(bin_x: usize, bin_y: usize) -> Self {
        Action { bin_x, bin_y }
    }
}

/// Map action bins to a pusher velocity; bins outside 0..11 are rejected.
pub fn decode_action(action: Action) -> Result<Vec2> {
    if action.bin_x >= VELOCITY_BINS || action.bin_y >= VELOCITY_BINS {
        return Err(Error::InvalidAction(action.bin_x as i64, action.bin_y as i64));
    }
    Ok(Vec2::new(
        VELOCITY_MIN + VELOCITY_STEP * action.bin_x as f64,
        VELOCITY_MIN + VELOCITY_STEP * action.bin_y as f64,
    ))
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    Collision,
    Boundary,
    Timeout,
}

/// Full simulator state of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub workspace: Workspace,
    pub pusher_shape: ShapeSpec,
    pub pusher_pos: Vec2,
    pub object_shape: ShapeSpec,
    pub object_pose: Pose2D,
    pub target_pose: Pose2D,
    pub obstacles: Vec<Obstacle>,
    pub params: DynamicsParams,
    pub step_count: usize,
}

/// Correlated per-episode observation offsets; fresh uncorrelated draws are
/// added on top each step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseOffsets {
    pub object_dx: f64,
    pub object_dy: f64,
    pub object_dth: f64,
    pub pusher_dx: f64,
    pub pusher_dy: f64,
}

/// What the policy sees. With noise disabled this equals the true state.
#[derive(Debug, Clone)]
pub struct Observation {
    pub object_pose: Pose2D,
    pub target_pose: Pose2D,
    pub pusher_pos: Vec2,
    pub grid: Arc<OccupancyGrid>,
    /// Increments whenever the grid is re-rasterized; callers may cache
    /// grid-derived features per version.
    pub grid_version: u64,
}

/// Step outcome.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub termination: Option<Termination>,
    /// Obstacle contact (pusher or object) during this step.
    pub collision: bool,
}

/// Serializable environment snapshot for checkpoint resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub state: SceneState,
    pub rng: RngState,
    pub noise: NoiseOffsets,
    pub done: bool,
    pub grid_version: u64,
}

/// One pushing episode environment.
#[derive(Debug, Clone)]
pub struct PushEnv {
    scenario: ScenarioSpec,
    state: SceneState,
    grid: Arc<OccupancyGrid>,
    grid_version: u64,
    rng: ChaCha8Rng,
    noise: NoiseOffsets,
    done: bool,
}

fn draw_range(rng: &mut ChaCha8Rng, range: (f64, f64), randomize: bool) -> f64 {
    if randomize {
        rng.gen_range(range.0..range.1)
    } else {
        (range.0 + range.1) / 2.0
    }
}

impl PushEnv {
    /// Build and reset an environment for a scenario.
    pub fn new(scenario: ScenarioSpec, seed: u64) -> Result<(Self, Observation)> {
        let mut env = PushEnv {
            scenario,
            state: SceneState {
                workspace: Workspace::default_desk(),
                pusher_shape: base_pusher_shape(),
                pusher_pos: Vec2::ZERO,
                object_shape: base_object_shape(),
                object_pose: Pose2D::default(),
                target_pose: Pose2D::default(),
                obstacles: Vec::new(),
                params: DynamicsParams::default(),
                step_count: 0,
            },
            grid: Arc::new(OccupancyGrid::zeros(&Workspace::default_desk())),
            grid_version: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: NoiseOffsets::default(),
            done: true,
        };
        let obs = env.reset(seed)?;
        Ok((env, obs))
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn state(&self) -> &SceneState {
        &self.state
    }

    pub fn grid(&self) -> &Arc<OccupancyGrid> {
        &self.grid
    }

    pub fn grid_version(&self) -> u64 {
        self.grid_version
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Sample a fresh episode. All draws flow from `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let randomize = self.scenario.randomize;
        let ws = Workspace::default_desk();

        // Physics and scale draws.
        let object_scale = draw_range(&mut self.rng, OBJECT_SCALE_RANGE, randomize);
        let pusher_scale = draw_range(&mut self.rng, PUSHER_SCALE_RANGE, randomize);
        let object_shape = base_object_shape().with_scale(object_scale);
        let pusher_shape = base_pusher_shape().with_scale(pusher_scale);
        let params = DynamicsParams {
            static_friction: draw_range(&mut self.rng, STATIC_FRICTION_RANGE, randomize),
            dynamic_friction: draw_range(&mut self.rng, DYNAMIC_FRICTION_RANGE, randomize),
            restitution: draw_range(&mut self.rng, RESTITUTION_RANGE, randomize),
            object_mass: draw_range(&mut self.rng, OBJECT_MASS_RANGE, randomize),
            limit_surface_c: object_shape.mean_centroid_distance(),
        };

        // Object and target placement.
        let object_pose = self.sample_free_pose(&object_shape, &ws, &[], 0.0)?;
        let target_pose = self.sample_target_pose(&object_shape, &ws, &object_pose)?;

        // Obstacles along the object-target corridor.
        let mut obstacles: Vec<Obstacle> = Vec::new();
        let mut projections: Vec<f64> = Vec::new();
        let specs: Vec<ObstacleSpec> = self.scenario.obstacles.clone();
        for spec in &specs {
            for _ in 0..spec.count {
                let (obstacle, t) = self.sample_obstacle(
                    spec,
                    &ws,
                    &object_shape,
                    &object_pose,
                    &target_pose,
                    &obstacles,
                    &projections,
                )?;
                obstacles.push(obstacle);
                projections.push(t);
            }
        }

        // Pusher in free space.
        let obstacle_fps: Vec<_> = obstacles.iter().map(|o| o.footprint()).collect();
        let mut pusher_pos = Vec2::ZERO;
        let mut placed = false;
        let pr = 0.01 * pusher_scale;
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let p = Vec2::new(
                self.rng.gen_range(ws.origin.x + pr..ws.origin.x + ws.width - pr),
                self.rng.gen_range(ws.origin.y + pr..ws.origin.y + ws.height - pr),
            );
            let fp = pusher_shape.footprint(&Pose2D::new(p.x, p.y, 0.0));
            if !ws.contains_footprint(&fp) {
                continue;
            }
            let clear_object = !fp.collides_with(
                &object_shape.footprint(&object_pose),
                SPAWN_CLEARANCE,
            );
            let clear_obstacles = obstacle_fps
                .iter()
                .all(|ofp| !fp.collides_with(ofp, SPAWN_CLEARANCE));
            if clear_object && clear_obstacles {
                pusher_pos = p;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::ScenarioInfeasible {
                scenario: self.scenario.name.clone(),
                attempts: MAX_SAMPLE_ATTEMPTS,
            });
        }

        self.state = SceneState {
            workspace: ws,
            pusher_shape,
            pusher_pos,
            object_shape,
            object_pose,
            target_pose,
            obstacles,
            params,
            step_count: 0,
        };
        self.rasterize_obstacles();
        self.noise = if self.scenario.observation_noise {
            let pos = Normal::new(0.0, POS_NOISE_STD).expect("valid std");
            let ang = Normal::new(0.0, ANG_NOISE_STD).expect("valid std");
            NoiseOffsets {
                object_dx: pos.sample(&mut self.rng),
                object_dy: pos.sample(&mut self.rng),
                object_dth: ang.sample(&mut self.rng),
                pusher_dx: pos.sample(&mut self.rng),
                pusher_dy: pos.sample(&mut self.rng),
            }
        } else {
            NoiseOffsets::default()
        };
        self.done = false;
        Ok(self.make_observation())
    }

    fn sample_free_pose(
        &mut self,
        shape: &ShapeSpec,
        ws: &Workspace,
        avoid: &[crate::scene::Footprint],
        clearance: f64,
    ) -> Result<Pose2D> {
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let pose = Pose2D::new(
                self.rng.gen_range(ws.origin.x..ws.origin.x + ws.width),
                self.rng.gen_range(ws.origin.y..ws.origin.y + ws.height),
                self.rng
                    .gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let fp = shape.footprint(&pose);
            if !ws.contains_footprint(&fp) {
                continue;
            }
            if avoid.iter().all(|a| !fp.collides_with(a, clearance)) {
                return Ok(pose);
            }
        }
        Err(Error::ScenarioInfeasible {
            scenario: self.scenario.name.clone(),
            attempts: MAX_SAMPLE_ATTEMPTS,
        })
    }

    fn sample_target_pose(
        &mut self,
        object_shape: &ShapeSpec,
        ws: &Workspace,
        object_pose: &Pose2D,
    ) -> Result<Pose2D> {
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let pose = Pose2D::new(
                self.rng.gen_range(ws.origin.x..ws.origin.x + ws.width),
                self.rng.gen_range(ws.origin.y..ws.origin.y + ws.height),
                self.rng
                    .gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            if (pose.position() - object_pose.position()).norm() < MIN_TARGET_DISTANCE {
                continue;
            }
            if ws.contains_footprint(&object_shape.footprint(&pose)) {
                return Ok(pose);
            }
        }
        Err(Error::ScenarioInfeasible {
            scenario: self.scenario.name.clone(),
            attempts: MAX_SAMPLE_ATTEMPTS,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn sample_obstacle(
        &mut self,
        spec: &ObstacleSpec,
        ws: &Workspace,
        object_shape: &ShapeSpec,
        object_pose: &Pose2D,
        target_pose: &Pose2D,
        placed: &[Obstacle],
        projections: &[f64],
    ) -> Result<(Obstacle, f64)> {
        let seg_start = object_pose.position();
        let seg = target_pose.position() - seg_start;
        let lateral = seg.perp().unit().unwrap_or(Vec2::new(0.0, 1.0));
        let object_fp = object_shape.footprint(object_pose);
        let goal_fp = object_shape.footprint(target_pose);
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let scale = draw_range(
                &mut self.rng,
                (spec.scale_min, spec.scale_max),
                self.scenario.randomize,
            );
            let shape = spec.kind.shape().with_scale(scale);
            let t = self.rng.gen_range(CORRIDOR_T_RANGE.0..CORRIDOR_T_RANGE.1);
            if projections.iter().any(|&p| (p - t).abs() < MIN_PROJECTION_GAP) {
                continue;
            }
            let offset = self
                .rng
                .gen_range(-CORRIDOR_HALF_WIDTH..CORRIDOR_HALF_WIDTH);
            let theta = self
                .rng
                .gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            // Pose the obstacle so its *centroid* sits at the corridor point.
            let centroid_target = seg_start + seg * t + lateral * offset;
            let pose0 = Pose2D::new(0.0, 0.0, theta);
            let centroid_offset = pose0.rotate(shape.centroid());
            let pose = Pose2D::new(
                centroid_target.x - centroid_offset.x,
                centroid_target.y - centroid_offset.y,
                theta,
            );
            let fp = shape.footprint(&pose);
            if !ws.contains_footprint(&fp) {
                continue;
            }
            if fp.collides_with(&object_fp, SPAWN_CLEARANCE)
                || fp.collides_with(&goal_fp, GOAL_CLEARANCE)
            {
                continue;
            }
            if placed
                .iter()
                .any(|o| fp.collides_with(&o.footprint(), SPAWN_CLEARANCE))
            {
                continue;
            }
            let velocity = if spec.speed != 0.0 {
                let sign = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                Vec2::new(0.0, sign * spec.speed)
            } else {
                Vec2::ZERO
            };
            return Ok((
                Obstacle {
                    shape,
                    pose,
                    velocity,
                },
                t,
            ));
        }
        Err(Error::ScenarioInfeasible {
            scenario: self.scenario.name.clone(),
            attempts: MAX_SAMPLE_ATTEMPTS,
        })
    }

    fn rasterize_obstacles(&mut self) {
        let fps: Vec<_> = self.state.obstacles.iter().map(|o| o.footprint()).collect();
        self.grid = Arc::new(rasterize(&fps, &self.state.workspace));
        self.grid_version += 1;
    }

    fn make_observation(&mut self) -> Observation {
        let s = &self.state;
        let (object_pose, pusher_pos) = if self.scenario.observation_noise {
            let pos = Normal::new(0.0, POS_NOISE_STD).expect("valid std");
            let ang = Normal::new(0.0, ANG_NOISE_STD).expect("valid std");
            let obj = Pose2D::new(
                s.object_pose.x + self.noise.object_dx + pos.sample(&mut self.rng),
                s.object_pose.y + self.noise.object_dy + pos.sample(&mut self.rng),
                s.object_pose.theta + self.noise.object_dth + ang.sample(&mut self.rng),
            );
            let push = Vec2::new(
                s.pusher_pos.x + self.noise.pusher_dx + pos.sample(&mut self.rng),
                s.pusher_pos.y + self.noise.pusher_dy + pos.sample(&mut self.rng),
            );
            (obj, push)
        } else {
            (s.object_pose, s.pusher_pos)
        };
        Observation {
            object_pose,
            target_pose: s.target_pose,
            pusher_pos,
            grid: Arc::clone(&self.grid),
            grid_version: self.grid_version,
        }
    }

    /// Advance one control step.
    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let velocity = decode_action(action)?;

        let setup = PushSetup {
            pusher_radius: effective_pusher_radius(&self.state.pusher_shape),
            object_shape: self.state.object_shape.clone(),
            params: self.state.params,
        };
        let mut push_state = PushState {
            pusher_pos: self.state.pusher_pos,
            object_pose: self.state.object_pose,
        };
        dynamics_step(&setup, &mut push_state, velocity, STEP_DT);
        self.state.pusher_pos = push_state.pusher_pos;
        self.state.object_pose = push_state.object_pose;

        // Moving obstacles advance after the bodies, then the grid refreshes.
        let mut moved = false;
        for i in 0..self.state.obstacles.len() {
            if self.state.obstacles[i].is_dynamic() {
                let ws = self.state.workspace;
                move_dynamic_obstacle(&mut self.state.obstacles[i], &ws, STEP_DT);
                moved = true;
            }
        }
        if moved {
            self.rasterize_obstacles();
        }

        self.state.step_count += 1;

        let collision = self.detect_collision();
        let termination = self.classify_termination(collision);
        let reward = compute_reward(&self.state, collision, termination);
        self.done = termination.is_some();

        Ok(StepResult {
            observation: self.make_observation(),
            reward,
            done: self.done,
            termination,
            collision,
        })
    }

    fn detect_collision(&self) -> bool {
        let s = &self.state;
        let pusher_fp = s.pusher_shape.footprint(&Pose2D::new(
            s.pusher_pos.x,
            s.pusher_pos.y,
            0.0,
        ));
        let object_fp = s.object_shape.footprint(&s.object_pose);
        s.obstacles.iter().any(|o| {
            let ofp = o.footprint();
            pusher_fp.collides_with(&ofp, 0.0) || object_fp.collides_with(&ofp, 0.0)
        })
    }

    fn classify_termination(&self, collision: bool) -> Option<Termination> {
        let s = &self.state;
        if collision && self.scenario.terminate_on_collision {
            return Some(Termination::Collision);
        }
        let object_in = s
            .workspace
            .contains_footprint(&s.object_shape.footprint(&s.object_pose));
        let pusher_in = s.workspace.contains_footprint(&s.pusher_shape.footprint(
            &Pose2D::new(s.pusher_pos.x, s.pusher_pos.y, 0.0),
        ));
        if !object_in || !pusher_in {
            return Some(Termination::Boundary);
        }
        if self.is_success() {
            return Some(Termination::Success);
        }
        if s.step_count >= self.scenario.max_steps {
            return Some(Termination::Timeout);
        }
        None
    }

    fn is_success(&self) -> bool {
        let s = &self.state;
        let pos_err = (s.object_pose.position() - s.target_pose.position()).norm();
        if pos_err >= SUCCESS_POS_TOL {
            return false;
        }
        if self.scenario.position_only_success {
            return true;
        }
        wrap_angle(s.object_pose.theta - s.target_pose.theta).abs() < SUCCESS_ANG_TOL
    }

    /// Capture the exact episode state for checkpointing.
    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            state: self.state.clone(),
            rng: RngState::capture(&self.rng),
            noise: self.noise,
            done: self.done,
            grid_version: self.grid_version,
        }
    }

    /// Rebuild an environment from a snapshot (exact resume).
    pub fn restore(scenario: ScenarioSpec, snap: EnvSnapshot) -> Self {
        let mut env = PushEnv {
            scenario,
            state: snap.state,
            grid: Arc::new(OccupancyGrid::zeros(&Workspace::default_desk())),
            grid_version: snap.grid_version.wrapping_sub(1),
            rng: snap.rng.restore(),
            noise: snap.noise,
            done: snap.done,
        };
        env.rasterize_obstacles();
        env.grid_version = snap.grid_version;
        env
    }

    /// Draw the next auto-reset seed from this environment's stream.
    pub fn next_episode_seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Current observation without advancing state (fresh noise draw).
    pub fn observe(&mut self) -> Observation {
        self.make_observation()
    }
}

/// Scaled pusher disc radius.
pub fn effective_pusher_radius(shape: &ShapeSpec) -> f64 {
    match &shape.kind {
        crate::scene::ShapeKind::Circle { radius } => radius * shape.scale,
        _ => shape.scale * 0.01,
    }
}

/// Advance a moving obstacle by `dt`, reflecting at workspace boundaries with
/// a velocity sign flip.
pub fn move_dynamic_obstacle(obstacle: &mut Obstacle, ws: &Workspace, dt: f64) {
    if !obstacle.is_dynamic() {
        return;
    }
    let fp = obstacle.footprint();
    let (lo, hi) = fp.aabb();
    let y = obstacle.pose.y;
    // Allowed center range keeping the footprint inside along y.
    let min_y = ws.origin.y + (y - lo.y);
    let max_y = ws.origin.y + ws.height - (hi.y - y);
    if min_y >= max_y {
        obstacle.velocity = Vec2::ZERO;
        return;
    }
    let mut new_y = y + obstacle.velocity.y * dt;
    let mut vy = obstacle.velocity.y;
    while new_y > max_y || new_y < min_y {
        if new_y > max_y {
            new_y = 2.0 * max_y - new_y;
        } else {
            new_y = 2.0 * min_y - new_y;
        }
        vy = -vy;
    }
    obstacle.pose = Pose2D::new(obstacle.pose.x, new_y, obstacle.pose.theta);
    obstacle.velocity = Vec2::new(obstacle.velocity.x, vy);
}

/// Reward of the state after a step. `termination` must be the classified
/// cause for that same step (None mid-episode).
pub fn compute_reward(
    state: &SceneState,
    collision: bool,
    termination: Option<Termination>,
) -> f64 {
    let r_term = match termination {
        Some(Termination::Success) => R_SUCCESS,
        Some(Termination::Boundary) => R_BOUNDARY,
        _ => 0.0,
    };
    let r_coll = if collision { R_COLLISION } else { 0.0 };
    let dist = (state.object_pose.position() - state.target_pose.position()).norm();
    let r_dist = (dist / state.workspace.diagonal()).clamp(0.0, 1.0);
    let r_ang =
        wrap_angle(state.object_pose.theta - state.target_pose.theta).abs() / std::f64::consts::PI;
    r_term + K_DIST * (1.0 - r_dist) + K_ANG * (1.0 - r_ang) + r_coll
}
