//! Scenario definitions: obstacle sets, episode caps, and the named
//! evaluation suites.

use crate::error::{Error, Result};
use crate::scene::{ShapeSpec, Vec2};
use serde::{Deserialize, Serialize};

/// Steps per episode during training.
pub const TRAIN_MAX_STEPS: usize = 160;
/// Steps per episode during evaluation.
pub const EVAL_MAX_STEPS: usize = 200;
/// Speed of moving obstacles, m/s, along the y axis with boundary reflection.
pub const DYNAMIC_OBSTACLE_SPEED: f64 = 0.1;

/// Obstacle shape families available to scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Rectangle,
    Circle,
    Cross,
    Tee,
    Ell,
}

impl ObstacleKind {
    /// Base (unscaled) shape for this obstacle family.
    pub fn shape(self) -> ShapeSpec {
        match self {
            ObstacleKind::Rectangle => ShapeSpec::rectangle(0.12, 0.05),
            ObstacleKind::Circle => ShapeSpec::circle(0.05),
            // Two 0.12 x 0.04 bars at right angles sharing a center.
            ObstacleKind::Cross => ShapeSpec::composite(vec![
                rect_part(0.0, 0.0, 0.12, 0.04),
                rect_part(0.0, -0.04, 0.04, 0.04),
                rect_part(0.0, 0.04, 0.04, 0.04),
            ]),
            // Top bar with a stem below its middle.
            ObstacleKind::Tee => ShapeSpec::composite(vec![
                rect_part(0.0, 0.04, 0.12, 0.04),
                rect_part(0.0, -0.02, 0.04, 0.08),
            ]),
            // Horizontal bar with an upright at its left end.
            ObstacleKind::Ell => ShapeSpec::composite(vec![
                rect_part(0.0, -0.04, 0.12, 0.04),
                rect_part(-0.04, 0.02, 0.04, 0.08),
            ]),
        }
    }
}

/// Axis-aligned rectangle part centered at (cx, cy), CCW.
fn rect_part(cx: f64, cy: f64, w: f64, h: f64) -> Vec<Vec2> {
    let (hw, hh) = (w / 2.0, h / 2.0);
    vec![
        Vec2::new(cx - hw, cy - hh),
        Vec2::new(cx + hw, cy - hh),
        Vec2::new(cx + hw, cy + hh),
        Vec2::new(cx - hw, cy + hh),
    ]
}

/// One obstacle family entry of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub kind: ObstacleKind,
    pub count: usize,
    /// Uniform scale draw bounds (applied when randomization is on).
    pub scale_min: f64,
    pub scale_max: f64,
    /// Nonzero for moving obstacles; sign of the y velocity is drawn per
    /// episode.
    pub speed: f64,
}

impl ObstacleSpec {
    pub fn fixed(kind: ObstacleKind, count: usize) -> Self {
        ObstacleSpec {
            kind,
            count,
            scale_min: 0.8,
            scale_max: 1.2,
            speed: 0.0,
        }
    }
}

/// Everything that varies between training and evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub obstacles: Vec<ObstacleSpec>,
    pub max_steps: usize,
    /// Draw physics parameters and shape scales from their ranges; when off,
    /// every draw collapses to the range midpoint.
    pub randomize: bool,
    /// Apply correlated + uncorrelated observation noise.
    pub observation_noise: bool,
    /// Obstacle contact ends the episode (evaluation) or only penalizes
    /// (training).
    pub terminate_on_collision: bool,
    /// Ignore the orientation threshold in the success test.
    pub position_only_success: bool,
}

impl ScenarioSpec {
    /// Convert an evaluation suite into its training counterpart.
    pub fn for_training(mut self) -> Self {
        self.max_steps = TRAIN_MAX_STEPS;
        self.terminate_on_collision = false;
        self
    }

    pub fn has_dynamic_obstacles(&self) -> bool {
        self.obstacles.iter().any(|o| o.speed != 0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The training setting: one rectangular obstacle, collisions penalized but
/// not terminal.
pub fn training_scenario() -> ScenarioSpec {
    ScenarioSpec {
        name: "training".into(),
        obstacles: vec![ObstacleSpec::fixed(ObstacleKind::Rectangle, 1)],
        max_steps: TRAIN_MAX_STEPS,
        randomize: true,
        observation_noise: true,
        terminate_on_collision: false,
        position_only_success: false,
    }
}

/// Obstacle-free variant used for smoke training runs; success is
/// position-only.
pub fn free_scenario() -> ScenarioSpec {
    ScenarioSpec {
        name: "free".into(),
        obstacles: vec![],
        max_steps: TRAIN_MAX_STEPS,
        randomize: true,
        observation_noise: true,
        terminate_on_collision: false,
        position_only_success: true,
    }
}

/// The seven named evaluation suites.
pub const EVAL_SCENARIOS: [&str; 7] = [
    "training", "circular", "cross", "tee", "ell", "dual", "dynamic",
];

/// Build a named evaluation scenario (or the `free` smoke variant).
pub fn named_scenario(name: &str) -> Result<ScenarioSpec> {
    let eval = |name: &str, obstacles: Vec<ObstacleSpec>| ScenarioSpec {
        name: name.into(),
        obstacles,
        max_steps: EVAL_MAX_STEPS,
        randomize: true,
        observation_noise: true,
        terminate_on_collision: true,
        position_only_success: false,
    };
    let spec = match name {
        "training" => eval("training", vec![ObstacleSpec::fixed(ObstacleKind::Rectangle, 1)]),
        "circular" => eval("circular", vec![ObstacleSpec::fixed(ObstacleKind::Circle, 1)]),
        "cross" => eval("cross", vec![ObstacleSpec::fixed(ObstacleKind::Cross, 1)]),
        "tee" => eval("tee", vec![ObstacleSpec::fixed(ObstacleKind::Tee, 1)]),
        "ell" => eval("ell", vec![ObstacleSpec::fixed(ObstacleKind::Ell, 1)]),
        "dual" => eval("dual", vec![ObstacleSpec::fixed(ObstacleKind::Rectangle, 2)]),
        "dynamic" => {
            let mut ob = ObstacleSpec::fixed(ObstacleKind::Rectangle, 1);
            ob.speed = DYNAMIC_OBSTACLE_SPEED;
            eval("dynamic", vec![ob])
        }
        "free" => {
            let mut s = free_scenario();
            s.max_steps = EVAL_MAX_STEPS;
            s.terminate_on_collision = true;
            s
        }
        other => {
            return Err(Error::UnknownScenario {
                name: other.into(),
                known: {
                    let mut names: Vec<&str> = EVAL_SCENARIOS.to_vec();
                    names.push("free");
                    names.join(", ")
                },
            })
        }
    };
    Ok(spec)
}
