//! Vectorized environments with auto-reset.
//!
//! Each sub-environment owns an independent random stream derived from the
//! master seed and its index, so a batch of N environments produces the same
//! episodes no matter how many worker threads execute the steps.

use super::{Action, EnvSnapshot, Observation, PushEnv, ScenarioSpec, StepResult, Termination};
use crate::error::Result;
use crate::rng::indexed_seed;
use rayon::prelude::*;

/// Batched step outcome. When a sub-environment finishes, its slot reports the
/// terminal reward/flags, `terminal_observation` holds the episode's final
/// observation, and `observation` is already the first observation of the next
/// episode.
#[derive(Debug, Clone)]
pub struct VecStepResult {
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub terminations: Vec<Option<Termination>>,
    pub collisions: Vec<bool>,
    pub terminal_observations: Vec<Option<Observation>>,
}

/// Fixed-size batch of environments stepped in parallel.
pub struct VecEnv {
    envs: Vec<PushEnv>,
}

impl VecEnv {
    /// Create `count` environments seeded from `master_seed` and reset them
    /// all. Returns the initial observations.
    pub fn new(
        scenario: ScenarioSpec,
        count: usize,
        master_seed: u64,
    ) -> Result<(Self, Vec<Observation>)> {
        let results: Vec<Result<(PushEnv, Observation)>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let seed = indexed_seed(master_seed, "env", i as u64);
                PushEnv::new(scenario.clone(), seed)
            })
            .collect();
        let mut envs = Vec::with_capacity(count);
        let mut observations = Vec::with_capacity(count);
        for r in results {
            let (env, obs) = r?;
            envs.push(env);
            observations.push(obs);
        }
        Ok((VecEnv { envs }, observations))
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn env(&self, i: usize) -> &PushEnv {
        &self.envs[i]
    }

    /// Step every environment with its action; finished episodes reset
    /// immediately using a seed drawn from that environment's own stream.
    pub fn step(&mut self, actions: &[Action]) -> Result<VecStepResult> {
        if actions.len() != self.envs.len() {
            return Err(crate::error::Error::BatchLength {
                expected: self.envs.len(),
                got: actions.len(),
            });
        }
        let stepped: Vec<Result<(StepResult, Option<Observation>)>> = self
            .envs
            .par_iter_mut()
            .zip(actions.par_iter())
            .map(|(env, &action)| {
                let mut result = env.step(action)?;
                if result.done {
                    let terminal = result.observation.clone();
                    let seed = env.next_episode_seed();
                    result.observation = env.reset(seed)?;
                    Ok((result, Some(terminal)))
                } else {
                    Ok((result, None))
                }
            })
            .collect();

        let n = self.envs.len();
        let mut out = VecStepResult {
            observations: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            terminations: Vec::with_capacity(n),
            collisions: Vec::with_capacity(n),
            terminal_observations: Vec::with_capacity(n),
        };
        for r in stepped {
            let (result, terminal) = r?;
            out.observations.push(result.observation);
            out.rewards.push(result.reward);
            out.dones.push(result.done);
            out.terminations.push(result.termination);
            out.collisions.push(result.collision);
            out.terminal_observations.push(terminal);
        }
        Ok(out)
    }

    /// Fresh observations for every environment (draws observation noise).
    pub fn observe_all(&mut self) -> Vec<Observation> {
        self.envs.par_iter_mut().map(|e| e.observe()).collect()
    }

    /// Snapshot every sub-environment for checkpointing.
    pub fn snapshots(&self) -> Vec<EnvSnapshot> {
        self.envs.iter().map(|e| e.snapshot()).collect()
    }

    /// Rebuild a batch from snapshots.
    pub fn restore(scenario: ScenarioSpec, snapshots: Vec<EnvSnapshot>) -> Self {
        let envs = snapshots
            .into_iter()
            .map(|s| PushEnv::restore(scenario.clone(), s))
            .collect();
        VecEnv { envs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::training_scenario;
    use std::time::Instant;

    fn scenario() -> ScenarioSpec {
        let mut s = training_scenario();
        s.observation_noise = false;
        s
    }

    #[test]
    fn batch_matches_individually_seeded_envs() {
        let (mut batch, obs) = VecEnv::new(scenario(), 4, 123).unwrap();
        let mut singles: Vec<PushEnv> = (0..4)
            .map(|i| {
                PushEnv::new(scenario(), indexed_seed(123, "env", i as u64))
                    .unwrap()
                    .0
            })
            .collect();
        for (i, single) in singles.iter().enumerate() {
            assert_eq!(batch.env(i).state(), single.state());
            assert_eq!(obs[i].object_pose, single.state().object_pose);
        }
        let actions = vec![
            Action::new(6, 5),
            Action::new(4, 7),
            Action::new(10, 10),
            Action::new(0, 0),
        ];
        for _ in 0..30 {
            let r = batch.step(&actions).unwrap();
            for (i, single) in singles.iter_mut().enumerate() {
                let sr = single.step(actions[i]).unwrap();
                assert_eq!(sr.reward, r.rewards[i]);
                if sr.done {
                    let seed = single.next_episode_seed();
                    single.reset(seed).unwrap();
                }
                assert_eq!(single.state(), batch.env(i).state());
            }
        }
    }

    #[test]
    fn step_is_deterministic_across_runs() {
        let run = || {
            let (mut batch, _) = VecEnv::new(scenario(), 8, 7).unwrap();
            let actions: Vec<Action> = (0..8).map(|i| Action::new(i % 11, (i * 3) % 11)).collect();
            let mut rewards = Vec::new();
            for _ in 0..50 {
                rewards.extend(batch.step(&actions).unwrap().rewards);
            }
            rewards
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn auto_reset_reports_terminal_observation() {
        let mut s = scenario();
        s.max_steps = 2;
        let (mut batch, _) = VecEnv::new(s, 2, 5).unwrap();
        let actions = vec![Action::new(5, 5); 2];
        batch.step(&actions).unwrap();
        let r = batch.step(&actions).unwrap();
        assert!(r.dones.iter().all(|&d| d));
        assert!(r
            .terminations
            .iter()
            .all(|t| *t == Some(Termination::Timeout)));
        for i in 0..2 {
            let terminal = r.terminal_observations[i].as_ref().unwrap();
            // Fresh episode: new observation differs from the terminal one.
            assert_ne!(
                terminal.object_pose, r.observations[i].object_pose,
                "slot {i} should have reset"
            );
            assert!(!batch.env(i).is_done());
            assert_eq!(batch.env(i).state().step_count, 0);
        }
    }

    #[test]
    fn batch_length_mismatch_is_rejected() {
        let (mut batch, _) = VecEnv::new(scenario(), 3, 5).unwrap();
        let err = batch.step(&[Action::new(5, 5)]).unwrap_err();
        assert!(matches!(
            err,
            crate::error::Error::BatchLength {
                expected: 3,
                got: 1
            }
        ));
    }

    #[test]
    fn snapshot_restore_round_trips_batch() {
        let (mut batch, _) = VecEnv::new(scenario(), 3, 11).unwrap();
        let actions = vec![Action::new(8, 4); 3];
        for _ in 0..5 {
            batch.step(&actions).unwrap();
        }
        let snaps = batch.snapshots();
        let mut restored = VecEnv::restore(scenario(), snaps);
        for _ in 0..10 {
            let a = batch.step(&actions).unwrap();
            let b = restored.step(&actions).unwrap();
            assert_eq!(a.rewards, b.rewards);
            assert_eq!(a.dones, b.dones);
        }
        for i in 0..3 {
            assert_eq!(batch.env(i).state(), restored.env(i).state());
        }
    }

    #[test]
    #[ignore = "throughput benchmark; run explicitly"]
    fn simulation_throughput_exceeds_ten_thousand_steps_per_second() {
        let (mut batch, _) = VecEnv::new(scenario(), 16, 3).unwrap();
        let actions: Vec<Action> = (0..16).map(|i| Action::new(i % 11, (i * 7) % 11)).collect();
        // Warm up.
        for _ in 0..50 {
            batch.step(&actions).unwrap();
        }
        let start = Instant::now();
        let iters = 2000;
        for _ in 0..iters {
            batch.step(&actions).unwrap();
        }
        let elapsed = start.elapsed().as_secs_f64();
        let rate = (iters * 16) as f64 / elapsed;
        println!("simulation throughput: {rate:.0} env-steps/s");
        assert!(rate >= 10_000.0, "rate {rate:.0} below 10k env-steps/s");
    }
}
