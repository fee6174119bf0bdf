//! Evaluation bench: deterministic episode rollouts over the named scenario
//! suites, outcome classification, rate aggregation with binomial confidence
//! intervals, trajectory export, and bit-exact replay.

use crate::env::{Action, Observation, PushEnv, ScenarioSpec, Termination};
use crate::error::{Error, Result};
use crate::ppo::net::{ActorCritic, GridCaches, RecurrentState};
use crate::rng::{indexed_seed, substream};
use crate::scene::{wrap_angle, Pose2D, Vec2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Final classification and errors of one evaluation episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub kind: Termination,
    pub steps: usize,
    pub final_pos_error: f64,
    pub final_ang_error: f64,
    pub total_reward: f64,
    pub seed: u64,
    pub trajectory: Option<Trajectory>,
}

/// Post-step state sample recorded during an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub action: (usize, usize),
    pub pusher: Vec2,
    pub object: Pose2D,
    pub reward: f64,
    pub collision: bool,
}

/// Everything needed to re-simulate an episode: the scenario, the episode
/// seed (which reproduces the sampled layout and noise), and the actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario: ScenarioSpec,
    pub seed: u64,
    pub target: Pose2D,
    pub outcome: Termination,
    pub steps: Vec<TrajectoryStep>,
}

/// Stateful wrapper driving the actor network one observation at a time.
pub struct NetPolicy<'a> {
    nets: &'a ActorCritic,
    rec: RecurrentState,
    caches: GridCaches,
    rng: rand_chacha::ChaCha8Rng,
    deterministic: bool,
}

impl<'a> NetPolicy<'a> {
    pub fn new(nets: &'a ActorCritic, seed: u64, deterministic: bool) -> Self {
        NetPolicy {
            nets,
            rec: RecurrentState::zeros(1),
            caches: GridCaches::new(1),
            rng: substream(seed, "eval-policy"),
            deterministic,
        }
    }

    pub fn act(&mut self, obs: &Observation) -> Action {
        let out = self.nets.act(
            std::slice::from_ref(obs),
            &mut self.rec,
            &mut self.caches,
            &mut self.rng,
            self.deterministic,
        );
        out.actions[0]
    }
}

/// Run one episode with an arbitrary action source (tests use scripted
/// policies; `run_episode` wraps the network policy).
pub fn run_episode_with(
    mut policy: impl FnMut(&Observation) -> Action,
    scenario: ScenarioSpec,
    seed: u64,
    record: bool,
) -> Result<EpisodeOutcome> {
    let record_scenario = scenario.clone();
    let (mut env, mut obs) = PushEnv::new(scenario, seed)?;
    let target = env.state().target_pose;
    let mut steps = Vec::new();
    let mut total_reward = 0.0;
    let mut count = 0usize;
    let kind = loop {
        let action = policy(&obs);
        let result = env.step(action)?;
        count += 1;
        total_reward += result.reward;
        if record {
            steps.push(TrajectoryStep {
                step: count,
                action: (action.bin_x, action.bin_y),
                pusher: env.state().pusher_pos,
                object: env.state().object_pose,
                reward: result.reward,
                collision: result.collision,
            });
        }
        if result.done {
            break result.termination.expect("done implies termination");
        }
        obs = result.observation;
    };
    let state = env.state();
    let dx = state.object_pose.x - target.x;
    let dy = state.object_pose.y - target.y;
    Ok(EpisodeOutcome {
        kind,
        steps: count,
        final_pos_error: (dx * dx + dy * dy).sqrt(),
        final_ang_error: wrap_angle(state.object_pose.theta - target.theta).abs(),
        total_reward,
        seed,
        trajectory: record.then(|| Trajectory {
            scenario: record_scenario,
            seed,
            target,
            outcome: kind,
            steps,
        }),
    })
}

/// Run one episode under the trained policy (mode actions when
/// `deterministic`). The networks are never mutated.
pub fn run_episode(
    nets: &ActorCritic,
    scenario: ScenarioSpec,
    seed: u64,
    deterministic: bool,
    record: bool,
) -> Result<EpisodeOutcome> {
    let mut policy = NetPolicy::new(nets, seed, deterministic);
    run_episode_with(|obs| policy.act(obs), scenario, seed, record)
}

/// Per-scenario aggregate rates (percent) with 95% binomial half-widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub success_ci: f64,
    pub collision_rate: f64,
    pub collision_ci: f64,
    pub timeout_rate: f64,
    pub timeout_ci: f64,
    pub boundary_rate: f64,
    pub boundary_ci: f64,
    pub mean_steps_to_success: Option<f64>,
}

/// Reports for every requested scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<ScenarioReport>,
}

/// 95% normal-approximation half-width for a binomial proportion, in percent.
fn binomial_ci_percent(successes: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = successes as f64 / n as f64;
    1.96 * (p * (1.0 - p) / n as f64).sqrt() * 100.0
}

/// Exact recount of outcome kinds into a report row.
pub fn aggregate(scenario: &str, outcomes: &[EpisodeOutcome]) -> ScenarioReport {
    let n = outcomes.len();
    let count = |kind: Termination| outcomes.iter().filter(|o| o.kind == kind).count();
    let successes = count(Termination::Success);
    let collisions = count(Termination::Collision);
    let timeouts = count(Termination::Timeout);
    let boundaries = count(Termination::Boundary);
    debug_assert_eq!(successes + collisions + timeouts + boundaries, n);
    let pct = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
    let steps_to_success: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.kind == Termination::Success)
        .map(|o| o.steps as f64)
        .collect();
    ScenarioReport {
        scenario: scenario.to_string(),
        episodes: n,
        success_rate: pct(successes),
        success_ci: binomial_ci_percent(successes, n),
        collision_rate: pct(collisions),
        collision_ci: binomial_ci_percent(collisions, n),
        timeout_rate: pct(timeouts),
        timeout_ci: binomial_ci_percent(timeouts, n),
        boundary_rate: pct(boundaries),
        boundary_ci: binomial_ci_percent(boundaries, n),
        mean_steps_to_success: if steps_to_success.is_empty() {
            None
        } else {
            Some(steps_to_success.iter().sum::<f64>() / steps_to_success.len() as f64)
        },
    }
}

/// Evaluate a policy over `episodes` independently seeded episodes per
/// scenario. Episodes parallelize across workers; per-episode seeds depend
/// only on the master seed, the scenario name, and the episode index, so the
/// report is identical for any worker count.
pub fn run_suite(
    nets: &ActorCritic,
    scenarios: &[ScenarioSpec],
    episodes: usize,
    master_seed: u64,
    deterministic: bool,
) -> Result<MetricsReport> {
    if scenarios.is_empty() {
        return Err(Error::Config("scenario list must not be empty".into()));
    }
    let mut rows = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let stream = format!("eval-{}", scenario.name);
        let outcomes: Result<Vec<EpisodeOutcome>> = (0..episodes)
            .into_par_iter()
            .map(|i| {
                let seed = indexed_seed(master_seed, &stream, i as u64);
                run_episode(nets, scenario.clone(), seed, deterministic, false)
            })
            .collect();
        rows.push(aggregate(&scenario.name, &outcomes?));
    }
    Ok(MetricsReport { rows })
}

impl MetricsReport {
    /// Machine-readable CSV (one row per scenario).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,episodes,success_rate,success_ci,collision_rate,collision_ci,\
             timeout_rate,timeout_ci,boundary_rate,boundary_ci,mean_steps_to_success\n",
        );
        for r in &self.rows {
            let steps = r
                .mean_steps_to_success
                .map(|s| s.to_string())
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.episodes,
                r.success_rate,
                r.success_ci,
                r.collision_rate,
                r.collision_ci,
                r.timeout_rate,
                r.timeout_ci,
                r.boundary_rate,
                r.boundary_ci,
                steps
            )
            .expect("string write");
        }
        out
    }

    /// Human-readable fixed-width table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<12} {:>8} {:>16} {:>16} {:>16} {:>16} {:>14}",
            "scenario", "episodes", "success %", "collision %", "timeout %", "boundary %", "steps(succ)"
        )
        .expect("string write");
        for r in &self.rows {
            let steps = r
                .mean_steps_to_success
                .map(|s| format!("{s:.1}"))
                .unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "{:<12} {:>8} {:>10.1} ±{:>4.1} {:>10.1} ±{:>4.1} {:>10.1} ±{:>4.1} {:>10.1} ±{:>4.1} {:>14}",
                r.scenario,
                r.episodes,
                r.success_rate,
                r.success_ci,
                r.collision_rate,
                r.collision_ci,
                r.timeout_rate,
                r.timeout_ci,
                r.boundary_rate,
                r.boundary_ci,
                steps
            )
            .expect("string write");
        }
        out
    }
}

impl Trajectory {
    /// One JSON object per line: a header record, then one record per step.
    /// Identical trajectories serialize to identical bytes.
    pub fn to_ndjson(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Header<'a> {
            record: &'static str,
            scenario: &'a ScenarioSpec,
            seed: u64,
            target: &'a Pose2D,
            outcome: Termination,
            steps: usize,
        }
        let mut out = serde_json::to_string(&Header {
            record: "episode",
            scenario: &self.scenario,
            seed: self.seed,
            target: &self.target,
            outcome: self.outcome,
            steps: self.steps.len(),
        })?;
        out.push('\n');
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_ndjson(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            record: String,
            scenario: ScenarioSpec,
            seed: u64,
            target: Pose2D,
            outcome: Termination,
            steps: usize,
        }
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines
            .next()
            .ok_or_else(|| Error::TrajectoryFormat("empty file".into()))?;
        let header: Header = serde_json::from_str(first)
            .map_err(|e| Error::TrajectoryFormat(format!("bad header: {e}")))?;
        if header.record != "episode" {
            return Err(Error::TrajectoryFormat(format!(
                "expected an episode header, found record '{}'",
                header.record
            )));
        }
        let steps: Result<Vec<TrajectoryStep>> = lines
            .map(|l| {
                serde_json::from_str(l).map_err(|e| Error::TrajectoryFormat(format!("bad step: {e}")))
            })
            .collect();
        let steps = steps?;
        if steps.len() != header.steps {
            return Err(Error::TrajectoryFormat(format!(
                "header promises {} steps but the file holds {}",
                header.steps,
                steps.len()
            )));
        }
        Ok(Trajectory {
            scenario: header.scenario,
            seed: header.seed,
            target: header.target,
            outcome: header.outcome,
            steps,
        })
    }

    /// Plot-friendly CSV: one row per step.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("step,pusher_x,pusher_y,object_x,object_y,object_theta,reward,collision\n");
        for s in &self.steps {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.step,
                s.pusher.x,
                s.pusher.y,
                s.object.x,
                s.object.y,
                s.object.theta,
                s.reward,
                u8::from(s.collision)
            )
            .expect("string write");
        }
        out
    }
}

/// Divergence between a logged trajectory and its re-simulation.
#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub steps: usize,
    pub max_position_divergence: f64,
    pub max_angle_divergence: f64,
    pub max_reward_divergence: f64,
    pub outcome_matches: bool,
}

/// Re-simulate a trajectory from its scenario + seed + actions and measure
/// the worst-case divergence from the logged states.
pub fn replay(trajectory: &Trajectory) -> Result<ReplayReport> {
    let (mut env, _) = PushEnv::new(trajectory.scenario.clone(), trajectory.seed)?;
    let mut max_pos = 0.0f64;
    let mut max_ang = 0.0f64;
    let mut max_reward = 0.0f64;
    let mut final_kind = None;
    for (i, logged) in trajectory.steps.iter().enumerate() {
        if env.is_done() {
            return Err(Error::TrajectoryFormat(format!(
                "episode ended before logged step {} of {}",
                i + 1,
                trajectory.steps.len()
            )));
        }
        let result = env.step(Action::new(logged.action.0, logged.action.1))?;
        let state = env.state();
        let dp = ((state.pusher_pos.x - logged.pusher.x).powi(2)
            + (state.pusher_pos.y - logged.pusher.y).powi(2))
        .sqrt();
        let do_ = ((state.object_pose.x - logged.object.x).powi(2)
            + (state.object_pose.y - logged.object.y).powi(2))
        .sqrt();
        max_pos = max_pos.max(dp).max(do_);
        max_ang = max_ang.max(wrap_angle(state.object_pose.theta - logged.object.theta).abs());
        max_reward = max_reward.max((result.reward - logged.reward).abs());
        if result.done {
            final_kind = result.termination;
        }
    }
    Ok(ReplayReport {
        steps: trajectory.steps.len(),
        max_position_divergence: max_pos,
        max_angle_divergence: max_ang,
        max_reward_divergence: max_reward,
        outcome_matches: final_kind == Some(trajectory.outcome),
    })
}
