//! Fixed-length rollout storage and generalized advantage estimation.

use crate::nn::LstmState;
use crate::ppo::net::{RecurrentState, SeqInput, STATE_DIM};
use crate::scene::{OccupancyGrid, Vec2};
use ndarray::{s, Array1, Array2};
use std::sync::Arc;

/// Everything recorded about one vectorized step (all environments).
pub struct StepRecord {
    pub grids: Vec<Arc<OccupancyGrid>>,
    pub versions: Vec<u64>,
    pub contexts: Vec<(Vec2, Vec2)>,
    /// Normalized pose-state rows, `envs × 8`.
    pub states: Array2<f64>,
    pub actions: Vec<(usize, usize)>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    /// Rewards after any timeout bootstrapping.
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub episode_starts: Vec<bool>,
}

/// On-policy buffer holding `steps` records for `envs` environments, plus the
/// recurrent state that entered the rollout.
pub struct RolloutBuffer {
    pub envs: usize,
    pub records: Vec<StepRecord>,
    pub init_rec: RecurrentState,
    /// Value estimates for the observations after the final step.
    pub bootstrap_values: Array1<f64>,
}

impl RolloutBuffer {
    pub fn new(envs: usize, init_rec: RecurrentState) -> Self {
        RolloutBuffer {
            envs,
            records: Vec::new(),
            init_rec,
            bootstrap_values: Array1::zeros(envs),
        }
    }

    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn push(&mut self, record: StepRecord) {
        assert_eq!(record.states.nrows(), self.envs, "record width");
        self.records.push(record);
    }

    fn column(&self, f: impl Fn(&StepRecord, usize) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((self.steps(), self.envs), |(t, e)| f(&self.records[t], e))
    }

    pub fn rewards(&self) -> Array2<f64> {
        self.column(|r, e| r.rewards[e])
    }

    pub fn values(&self) -> Array2<f64> {
        self.column(|r, e| r.values[e])
    }

    pub fn log_probs(&self) -> Array2<f64> {
        self.column(|r, e| r.log_probs[e])
    }

    pub fn dones(&self) -> Vec<Vec<bool>> {
        self.records.iter().map(|r| r.dones.clone()).collect()
    }

    /// Training sequence for environment `e`; `init` selects which network's
    /// entering recurrent row to replay (policy or value).
    pub fn sequence(&self, e: usize, init: &LstmState) -> SeqInput {
        let t = self.steps();
        let mut states = Array2::zeros((t, STATE_DIM));
        for (ti, r) in self.records.iter().enumerate() {
            states.row_mut(ti).assign(&r.states.row(e));
        }
        SeqInput {
            grids: self.records.iter().map(|r| Arc::clone(&r.grids[e])).collect(),
            grid_versions: self.records.iter().map(|r| r.versions[e]).collect(),
            contexts: self.records.iter().map(|r| r.contexts[e]).collect(),
            states,
            episode_starts: self.records.iter().map(|r| r.episode_starts[e]).collect(),
            init: LstmState {
                h: init.h.slice(s![e..=e, ..]).to_owned(),
                c: init.c.slice(s![e..=e, ..]).to_owned(),
            },
        }
    }

    pub fn actions(&self, e: usize) -> Vec<(usize, usize)> {
        self.records.iter().map(|r| r.actions[e]).collect()
    }
}

/// Advantage estimates and value-function regression targets.
pub struct Advantages {
    /// `steps × envs`.
    pub advantages: Array2<f64>,
    /// `advantages + values`.
    pub returns: Array2<f64>,
}

/// Generalized advantage estimation over a rollout.
///
/// `delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t`,
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`, with
/// `V_steps` taken from `bootstrap` (the value after the final step).
/// Timed-out episodes are expected to carry their bootstrap inside `rewards`,
/// so `done` always cuts the recursion.
pub fn compute_gae(
    rewards: &Array2<f64>,
    values: &Array2<f64>,
    dones: &[Vec<bool>],
    bootstrap: &Array1<f64>,
    gamma: f64,
    lambda: f64,
) -> Advantages {
    let (steps, envs) = rewards.dim();
    let mut advantages = Array2::zeros((steps, envs));
    for e in 0..envs {
        let mut running = 0.0;
        for t in (0..steps).rev() {
            let cont = if dones[t][e] { 0.0 } else { 1.0 };
            let next_value = if t + 1 == steps {
                bootstrap[e]
            } else {
                values[[t + 1, e]]
            };
            let delta = rewards[[t, e]] + gamma * next_value * cont - values[[t, e]];
            running = delta + gamma * lambda * cont * running;
            advantages[[t, e]] = running;
        }
    }
    let returns = &advantages + values;
    Advantages { advantages, returns }
}
