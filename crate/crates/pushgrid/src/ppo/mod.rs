//! Recurrent proximal-policy-optimization trainer.
//!
//! Rollouts are collected from a vectorized batch of environments with
//! persistent LSTM states; updates replay whole sequences (truncated
//! backpropagation restarts at episode boundaries) in shuffled minibatches.
//! Per-sequence gradients are accumulated in a fixed number of chunks that
//! are always reduced in the same order, so training is bit-reproducible
//! regardless of how many worker threads execute the chunks.

pub mod checkpoint;
pub mod net;
pub mod rollout;

use crate::env::{Termination, VecEnv};
use crate::env::{Observation, ScenarioSpec};
use crate::error::{Error, Result};
use crate::extractors::ExtractorKind;
use crate::nn::{clip_grad_norm, zero_grads, Adam, ParamSet};
use crate::rng::{substream, RngState};
use net::{state_vector, ActorCritic, GridCaches, RecurrentState, SeqInput};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rollout::{compute_gae, RolloutBuffer, StepRecord};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Number of gradient accumulation chunks per minibatch. Chunk boundaries and
/// the reduction order depend only on the minibatch size, never on thread
/// count, which keeps updates bit-identical across worker configurations.
pub const GRAD_CHUNKS: usize = 8;

/// Completed-episode window used for rolling training metrics.
const EPISODE_WINDOW: usize = 100;

/// Trainer hyperparameters. The defaults are the reference configuration;
/// tests shrink the rollout/batch sizes but never change the loss math.
/// Fields omitted from a JSON config fall back to the defaults; unknown
/// fields are rejected so typos surface as errors naming the bad key.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub extractor: ExtractorKind,
    pub n_envs: usize,
    pub rollout_steps: usize,
    pub epochs: usize,
    pub minibatches: usize,
    pub clip_range: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub kl_target: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            extractor: ExtractorKind::Attention,
            n_envs: 16,
            rollout_steps: 120,
            epochs: 5,
            minibatches: 4,
            clip_range: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            entropy_coef: 0.0,
            value_coef: 0.5,
            learning_rate: 3e-4,
            kl_target: 0.01,
            max_grad_norm: 1.0,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_envs == 0 {
            return Err(Error::Config("n_envs must be positive".into()));
        }
        if self.rollout_steps == 0 {
            return Err(Error::Config("rollout_steps must be positive".into()));
        }
        if self.epochs == 0 || self.minibatches == 0 {
            return Err(Error::Config("epochs and minibatches must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.clip_range) || self.clip_range == 0.0 {
            return Err(Error::Config("clip_range must be in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gamma and gae_lambda must be in [0, 1]".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Aggregated statistics for one optimizer update (all epochs/minibatches).
#[derive(Debug, Clone, Serialize)]
pub struct TrainMetrics {
    pub update: u64,
    pub env_steps: u64,
    pub learning_rate: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub episode_return_mean: Option<f64>,
    pub episode_length_mean: Option<f64>,
    pub success_rate: Option<f64>,
    pub episodes_completed: u64,
}

#[derive(Debug, Clone)]
struct EpisodeStat {
    ret: f64,
    len: u64,
    termination: Termination,
}

/// One sequence prepared for a minibatch update.
struct SeqItem {
    policy_seq: SeqInput,
    value_seq: SeqInput,
    actions: Vec<(usize, usize)>,
    old_log_probs: Array1<f64>,
    advantages: Array1<f64>,
    returns: Array1<f64>,
}

#[derive(Debug, Default, Clone, Copy)]
struct StatSums {
    kl: f64,
    clip: f64,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    samples: f64,
}

impl StatSums {
    fn add(&mut self, other: &StatSums) {
        self.kl += other.kl;
        self.clip += other.clip;
        self.policy_loss += other.policy_loss;
        self.value_loss += other.value_loss;
        self.entropy += other.entropy;
        self.samples += other.samples;
    }
}

/// On-policy trainer owning the networks, optimizer, and environment batch.
pub struct Trainer {
    pub config: PpoConfig,
    pub scenario: ScenarioSpec,
    pub nets: ActorCritic,
    pub opt: Adam,
    pub envs: VecEnv,
    pub obs: Vec<Observation>,
    pub rec: RecurrentState,
    caches: GridCaches,
    act_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    episode_starts: Vec<bool>,
    running_returns: Vec<f64>,
    running_lengths: Vec<u64>,
    recent_episodes: VecDeque<EpisodeStat>,
    pub env_steps: u64,
    pub updates: u64,
    pub episodes_completed: u64,
}

impl Trainer {
    pub fn new(config: PpoConfig, scenario: ScenarioSpec) -> Result<Self> {
        config.validate()?;
        let mut init_rng = substream(config.seed, "init");
        let nets = ActorCritic::new(config.extractor, &mut init_rng);
        Self::assemble(config, scenario, nets, None)
    }

    /// Fresh trainer whose networks start from existing parameters
    /// (fine-tuning on a new scenario). The optimizer restarts.
    pub fn from_params(config: PpoConfig, scenario: ScenarioSpec, source: &ActorCritic) -> Result<Self> {
        Self::check_kind(&config, source)?;
        let mut init_rng = substream(config.seed, "init");
        let mut nets = ActorCritic::new(config.extractor, &mut init_rng);
        net::copy_params(&mut nets, source);
        Self::assemble(config, scenario, nets, None)
    }

    /// Fine-tuning continuation: keeps the networks *and* optimizer state
    /// (moments, adapted learning rate, step count) from a finished run, but
    /// builds fresh environments, recurrent state, and RNG streams for the
    /// new scenario. Progress counters start at zero.
    pub fn fine_tune(
        config: PpoConfig,
        scenario: ScenarioSpec,
        nets: ActorCritic,
        opt: Adam,
    ) -> Result<Self> {
        Self::check_kind(&config, &nets)?;
        Self::assemble(config, scenario, nets, Some(opt))
    }

    fn check_kind(config: &PpoConfig, source: &ActorCritic) -> Result<()> {
        config.validate()?;
        if source.policy.extractor.kind() != config.extractor {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint extractor is '{}' but the configuration requests '{}'",
                source.policy.extractor.kind(),
                config.extractor
            )));
        }
        Ok(())
    }

    fn assemble(
        config: PpoConfig,
        scenario: ScenarioSpec,
        nets: ActorCritic,
        opt: Option<Adam>,
    ) -> Result<Self> {
        let opt = opt.unwrap_or_else(|| Adam::new(config.learning_rate));
        let (envs, obs) = VecEnv::new(scenario.clone(), config.n_envs, config.seed)?;
        let n = config.n_envs;
        Ok(Trainer {
            act_rng: substream(config.seed, "act"),
            update_rng: substream(config.seed, "update"),
            rec: RecurrentState::zeros(n),
            caches: GridCaches::new(n),
            episode_starts: vec![true; n],
            running_returns: vec![0.0; n],
            running_lengths: vec![0; n],
            recent_episodes: VecDeque::new(),
            env_steps: 0,
            updates: 0,
            episodes_completed: 0,
            config,
            scenario,
            nets,
            opt,
            envs,
            obs,
        })
    }

    /// Roll the environment batch forward `rollout_steps` steps, recording
    /// everything needed to replay the sequences for training.
    pub fn collect_rollout(&mut self) -> Result<RolloutBuffer> {
        let n = self.config.n_envs;
        let ws = crate::scene::Workspace::default_desk();
        let mut buffer = RolloutBuffer::new(n, self.rec.clone());

        for _ in 0..self.config.rollout_steps {
            let out = self.nets.act(
                &self.obs,
                &mut self.rec,
                &mut self.caches,
                &mut self.act_rng,
                false,
            );
            let result = self.envs.step(&out.actions)?;

            let mut rewards = result.rewards.clone();
            for i in 0..n {
                if result.terminations[i] == Some(Termination::Timeout) {
                    // Truncated episode: fold the value of the would-be next
                    // state into the final reward so advantage estimation
                    // treats the cut as bootstrapped rather than terminal.
                    let terminal = result.terminal_observations[i]
                        .as_ref()
                        .expect("timeout provides a terminal observation");
                    rewards[i] += self.config.gamma * self.nets.peek_value(terminal, &self.rec, i);
                }
            }

            let mut states = Array2::zeros((n, net::STATE_DIM));
            for (i, o) in self.obs.iter().enumerate() {
                states.row_mut(i).assign(&ndarray::arr1(&state_vector(&ws, o)));
            }
            buffer.push(StepRecord {
                grids: self.obs.iter().map(|o| std::sync::Arc::clone(&o.grid)).collect(),
                versions: self.obs.iter().map(|o| o.grid_version).collect(),
                contexts: self
                    .obs
                    .iter()
                    .map(|o| (o.object_pose.position(), o.target_pose.position()))
                    .collect(),
                states,
                actions: out.actions.iter().map(|a| (a.bin_x, a.bin_y)).collect(),
                log_probs: out.log_probs.clone(),
                values: out.values.clone(),
                rewards,
                dones: result.dones.clone(),
                episode_starts: self.episode_starts.clone(),
            });

            self.env_steps += n as u64;
            for i in 0..n {
                self.running_returns[i] += result.rewards[i];
                self.running_lengths[i] += 1;
                if result.dones[i] {
                    self.recent_episodes.push_back(EpisodeStat {
                        ret: self.running_returns[i],
                        len: self.running_lengths[i],
                        termination: result.terminations[i].expect("done implies termination"),
                    });
                    if self.recent_episodes.len() > EPISODE_WINDOW {
                        self.recent_episodes.pop_front();
                    }
                    self.episodes_completed += 1;
                    self.running_returns[i] = 0.0;
                    self.running_lengths[i] = 0;
                    self.rec.reset_env(i);
                    self.episode_starts[i] = true;
                } else {
                    self.episode_starts[i] = false;
                }
            }
            self.obs = result.observations;
        }

        // Value of the observation after the last step, on a scratch copy of
        // the recurrent state so the next rollout resumes seamlessly.
        let mut scratch = self.rec.clone();
        let out = self.nets.act(
            &self.obs,
            &mut scratch,
            &mut self.caches,
            &mut self.act_rng.clone(),
            true,
        );
        buffer.bootstrap_values = Array1::from_vec(out.values);
        Ok(buffer)
    }

    /// Run the clipped-surrogate update over one rollout.
    pub fn update(&mut self, buffer: &RolloutBuffer) -> Result<TrainMetrics> {
        let n = self.config.n_envs;
        let adv = compute_gae(
            &buffer.rewards(),
            &buffer.values(),
            &buffer.dones(),
            &buffer.bootstrap_values,
            self.config.gamma,
            self.config.gae_lambda,
        );
        let old_log_probs = buffer.log_probs();

        let mut totals = StatSums::default();
        let mut grad_norm_sum = 0.0;
        let mut minibatch_count = 0u64;

        for _epoch in 0..self.config.epochs {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut self.update_rng);
            let mb_size = n.div_ceil(self.config.minibatches);
            for mb in order.chunks(mb_size) {
                let stats = self.minibatch_step(buffer, &adv.advantages, &adv.returns, &old_log_probs, mb)?;
                grad_norm_sum = stats.1 + grad_norm_sum;
                totals.add(&stats.0);
                minibatch_count += 1;
            }
        }

        // Cached grid entries were computed with the pre-update parameters;
        // drop them so the next rollout featurizes with the new weights.
        self.caches = GridCaches::new(n);

        self.updates += 1;
        let inv = 1.0 / totals.samples.max(1.0);
        let window = &self.recent_episodes;
        let (ep_ret, ep_len, succ) = if window.is_empty() {
            (None, None, None)
        } else {
            let count = window.len() as f64;
            (
                Some(window.iter().map(|e| e.ret).sum::<f64>() / count),
                Some(window.iter().map(|e| e.len as f64).sum::<f64>() / count),
                Some(
                    window
                        .iter()
                        .filter(|e| e.termination == Termination::Success)
                        .count() as f64
                        / count,
                ),
            )
        };
        Ok(TrainMetrics {
            update: self.updates,
            env_steps: self.env_steps,
            learning_rate: self.opt.lr,
            approx_kl: totals.kl * inv,
            clip_fraction: totals.clip * inv,
            policy_loss: totals.policy_loss * inv,
            value_loss: totals.value_loss * inv,
            entropy: totals.entropy * inv,
            grad_norm: grad_norm_sum / minibatch_count.max(1) as f64,
            episode_return_mean: ep_ret,
            episode_length_mean: ep_len,
            success_rate: succ,
            episodes_completed: self.episodes_completed,
        })
    }

    /// One gradient step on the sequences in `mb`. Returns the stat sums and
    /// the pre-clip gradient norm.
    fn minibatch_step(
        &mut self,
        buffer: &RolloutBuffer,
        advantages: &Array2<f64>,
        returns: &Array2<f64>,
        old_log_probs: &Array2<f64>,
        mb: &[usize],
    ) -> Result<(StatSums, f64)> {
        let steps = buffer.steps();
        let total_samples = (steps * mb.len()) as f64;

        // Normalize advantages over the minibatch.
        let mut mean = 0.0;
        for &e in mb {
            mean += advantages.column(e).sum();
        }
        mean /= total_samples;
        let mut var = 0.0;
        for &e in mb {
            var += advantages.column(e).mapv(|a| (a - mean).powi(2)).sum();
        }
        var /= total_samples;
        let denom = var.sqrt() + 1e-8;

        let items: Vec<SeqItem> = mb
            .iter()
            .map(|&e| SeqItem {
                policy_seq: buffer.sequence(e, &buffer.init_rec.policy),
                value_seq: buffer.sequence(e, &buffer.init_rec.value),
                actions: buffer.actions(e),
                old_log_probs: old_log_probs.column(e).to_owned(),
                advantages: advantages.column(e).mapv(|a| (a - mean) / denom),
                returns: returns.column(e).to_owned(),
            })
            .collect();

        let scale = 1.0 / total_samples;
        let chunk_size = items.len().div_ceil(GRAD_CHUNKS);
        let chunks: Vec<&[SeqItem]> = items.chunks(chunk_size).collect();
        let cfg = self.config.clone();
        let results: Vec<(Vec<Array2<f64>>, StatSums)> = chunks
            .into_par_iter()
            .map(|chunk| chunk_gradients(&self.nets, chunk, &cfg, scale))
            .collect();

        // Fixed-order reduction: chunk 0 + chunk 1 + ... regardless of which
        // thread produced each result.
        let mut iter = results.into_iter();
        let (mut grads, mut sums) = iter.next().expect("at least one chunk");
        for (g, s) in iter {
            for (acc, add) in grads.iter_mut().zip(&g) {
                *acc += add;
            }
            sums.add(&s);
        }

        if !(sums.policy_loss.is_finite() && sums.value_loss.is_finite() && sums.kl.is_finite()) {
            return Err(Error::TrainingFault(format!(
                "non-finite minibatch losses at update {} (policy {}, value {}, kl {})",
                self.updates, sums.policy_loss, sums.value_loss, sums.kl
            )));
        }

        zero_grads(&mut self.nets);
        for ((_, p), g) in self.nets.named_params_mut().into_iter().zip(&grads) {
            p.grad.assign(g);
        }
        let grad_norm = clip_grad_norm(&mut self.nets, self.config.max_grad_norm);

        // Adapt the learning rate from this minibatch's divergence before
        // applying the step.
        let kl = sums.kl / sums.samples.max(1.0);
        if kl > 2.0 * self.config.kl_target {
            self.opt.lr /= 1.5;
        } else if kl < 0.5 * self.config.kl_target {
            self.opt.lr *= 1.5;
        }
        self.opt.lr = self.opt.lr.clamp(1e-6, 1e-2);
        self.opt.step(&mut self.nets);

        Ok((sums, grad_norm))
    }

    /// Collect one rollout and run one update.
    pub fn iterate(&mut self) -> Result<TrainMetrics> {
        let buffer = self.collect_rollout()?;
        self.update(&buffer)
    }

    /// Train until at least `total_env_steps` environment steps have been
    /// simulated, invoking `on_update` after every optimizer update.
    pub fn train_steps(
        &mut self,
        total_env_steps: u64,
        mut on_update: impl FnMut(&Trainer, &TrainMetrics) -> Result<()>,
    ) -> Result<()> {
        while self.env_steps < total_env_steps {
            let metrics = self.iterate()?;
            on_update(self, &metrics)?;
        }
        Ok(())
    }

    pub fn act_rng_state(&self) -> RngState {
        RngState::capture(&self.act_rng)
    }

    pub fn update_rng_state(&self) -> RngState {
        RngState::capture(&self.update_rng)
    }

    pub fn recent_success_rate(&self) -> Option<f64> {
        if self.recent_episodes.is_empty() {
            None
        } else {
            Some(
                self.recent_episodes
                    .iter()
                    .filter(|e| e.termination == Termination::Success)
                    .count() as f64
                    / self.recent_episodes.len() as f64,
            )
        }
    }
}

/// Gradients and statistics for one chunk of sequences, computed on a private
/// copy of the networks so chunks can run on any thread.
fn chunk_gradients(
    template: &ActorCritic,
    chunk: &[SeqItem],
    cfg: &PpoConfig,
    scale: f64,
) -> (Vec<Array2<f64>>, StatSums) {
    let mut nets = template.clone();
    zero_grads(&mut nets);
    let mut sums = StatSums::default();

    for item in chunk {
        let (logits, policy_cache) = nets.policy.forward_sequence(&item.policy_seq);
        let (values, value_cache) = nets.value.forward_sequence(&item.value_seq);
        let new_log_probs = nets.dist.log_prob(&logits, &item.actions);
        let entropy = nets.dist.entropy(&logits);
        let t = item.actions.len();

        let mut coeff = Array1::zeros(t);
        for ti in 0..t {
            let ratio: f64 = (new_log_probs[ti] - item.old_log_probs[ti]).exp();
            let a = item.advantages[ti];
            let unclipped = ratio * a;
            let clipped = ratio.clamp(1.0 - cfg.clip_range, 1.0 + cfg.clip_range) * a;
            if unclipped <= clipped {
                coeff[ti] = -a * ratio * scale;
            }
            sums.policy_loss -= unclipped.min(clipped);
            sums.clip += f64::from((ratio - 1.0).abs() > cfg.clip_range);
            sums.kl += item.old_log_probs[ti] - new_log_probs[ti];
            sums.entropy += entropy[ti];
        }
        let mut dlogits = nets.dist.log_prob_grad(&logits, &item.actions, &coeff);
        if cfg.entropy_coef != 0.0 {
            let ent_coeff = Array1::from_elem(t, -cfg.entropy_coef * scale);
            dlogits += &nets.dist.entropy_grad(&logits, &ent_coeff);
        }
        nets.policy.backward_sequence(&policy_cache, &dlogits);

        let mut dvalues = Array2::zeros((t, 1));
        for ti in 0..t {
            let err = values[[ti, 0]] - item.returns[ti];
            sums.value_loss += err * err;
            dvalues[[ti, 0]] = cfg.value_coef * 2.0 * err * scale;
        }
        nets.value.backward_sequence(&value_cache, &dvalues);

        if cfg.entropy_coef != 0.0 {
            for ti in 0..t {
                sums.policy_loss -= cfg.entropy_coef * entropy[ti];
            }
        }
        sums.samples += t as f64;
    }

    let grads = nets
        .named_params()
        .iter()
        .map(|(_, p)| p.grad.clone())
        .collect();
    (grads, sums)
}
