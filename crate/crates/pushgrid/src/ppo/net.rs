//! Recurrent actor and critic networks.
//!
//! Each network owns its own grid extractor (policy and value share no
//! weights): extractor features (64) and a linear+tanh encoding of the
//! 8-dimensional pose state (64) are concatenated into a 256-unit LSTM,
//! followed by a tanh layer and a linear head (22 action logits for the
//! policy, a scalar for the value function).

use crate::env::{Action, Observation, VELOCITY_BINS};
use crate::extractors::{ExtractorKind, GridEntry, GridExtractor, SegmentCache, FEATURE_DIM};
use crate::nn::{CategoricalPair, Linear, LstmCell, LstmState, LstmStepCache, Mlp, MlpCache, Param, ParamSet};
use crate::scene::{OccupancyGrid, Vec2, Workspace};
use ndarray::{s, Array2};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;
use std::sync::Arc;

/// Pose-state input width: object pose (3), target pose (3), pusher (2).
pub const STATE_DIM: usize = 8;
/// Width of the encoded pose state.
pub const STATE_FEATURES: usize = 64;
/// LSTM hidden width.
pub const LSTM_HIDDEN: usize = 256;
/// Post-LSTM hidden layer width.
pub const HEAD_HIDDEN: usize = 128;
/// Policy head output width (two velocity-bin distributions).
pub const POLICY_OUT: usize = 2 * VELOCITY_BINS;

/// Normalized pose-state vector: positions mapped to [-1, 1] across the
/// workspace, angles divided by pi.
pub fn state_vector(ws: &Workspace, obs: &Observation) -> [f64; STATE_DIM] {
    let nx = |x: f64| 2.0 * (x - ws.origin.x) / ws.width - 1.0;
    let ny = |y: f64| 2.0 * (y - ws.origin.y) / ws.height - 1.0;
    [
        nx(obs.object_pose.x),
        ny(obs.object_pose.y),
        obs.object_pose.theta / std::f64::consts::PI,
        nx(obs.target_pose.x),
        ny(obs.target_pose.y),
        obs.target_pose.theta / std::f64::consts::PI,
        nx(obs.pusher_pos.x),
        ny(obs.pusher_pos.y),
    ]
}

/// One recurrent network: extractor + state encoder + LSTM + head.
#[derive(Debug, Clone)]
pub struct Net {
    pub extractor: GridExtractor,
    pub state_mlp: Mlp,
    pub lstm: LstmCell,
    pub head_mlp: Mlp,
    pub head: Linear,
}

impl Net {
    /// `head_gain` follows the head's role: 0.01 for policy logits, 1.0 for
    /// the value scalar.
    pub fn new(kind: ExtractorKind, out_dim: usize, head_gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let gain = std::f64::consts::SQRT_2;
        Net {
            extractor: GridExtractor::new(kind, rng),
            state_mlp: Mlp::new(&[STATE_DIM, STATE_FEATURES], gain, true, rng),
            lstm: LstmCell::new(FEATURE_DIM + STATE_FEATURES, LSTM_HIDDEN, rng),
            head_mlp: Mlp::new(&[LSTM_HIDDEN, HEAD_HIDDEN], gain, true, rng),
            head: Linear::new(HEAD_HIDDEN, out_dim, head_gain, rng),
        }
    }

    /// Batched single-step forward for acting. `entries[i]` must belong to
    /// `obs[i]`'s grid; `rec` advances in place (row per environment).
    pub fn act_forward(
        &self,
        obs: &[Observation],
        entries: &[GridEntry],
        rec: &mut LstmState,
    ) -> Array2<f64> {
        let b = obs.len();
        let ws = Workspace::default_desk();
        let mut x = Array2::zeros((b, FEATURE_DIM + STATE_FEATURES));
        let mut states = Array2::zeros((b, STATE_DIM));
        for (i, o) in obs.iter().enumerate() {
            let f = self
                .extractor
                .features(&entries[i], o.object_pose.position(), o.target_pose.position());
            x.slice_mut(s![i, ..FEATURE_DIM]).assign(&f);
            states.row_mut(i).assign(&ndarray::arr1(&state_vector(&ws, o)));
        }
        let s_out = self.state_mlp.forward_nograd(&states);
        x.slice_mut(s![.., FEATURE_DIM..]).assign(&s_out);
        *rec = self.lstm.step_nograd(&x, rec);
        let hidden = self.head_mlp.forward_nograd(&rec.h);
        self.head.forward(&hidden)
    }

    /// Single-observation forward on a copy of one recurrent row, without
    /// touching persistent state (used to bootstrap timed-out episodes).
    pub fn peek_forward(&self, obs: &Observation, rec: &LstmState, row: usize) -> Array2<f64> {
        let entry = self.extractor.grid_entry(&obs.grid);
        let mut one = LstmState {
            h: rec.h.slice(s![row..=row, ..]).to_owned(),
            c: rec.c.slice(s![row..=row, ..]).to_owned(),
        };
        self.act_forward(std::slice::from_ref(obs), std::slice::from_ref(&entry), &mut one)
    }
}

/// One training sequence: `t` consecutive steps from a single environment.
#[derive(Debug, Clone)]
pub struct SeqInput {
    pub grids: Vec<Arc<OccupancyGrid>>,
    pub grid_versions: Vec<u64>,
    /// Noisy object/target positions per step (extractor context).
    pub contexts: Vec<(Vec2, Vec2)>,
    /// Normalized pose-state rows, `t × 8`.
    pub states: Array2<f64>,
    pub episode_starts: Vec<bool>,
    /// Recurrent state entering the sequence (one row).
    pub init: LstmState,
}

impl SeqInput {
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Maximal step ranges sharing one grid (the extractor can batch each).
    fn segments(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0usize;
        for t in 1..self.len() {
            if self.grid_versions[t] != self.grid_versions[t - 1] {
                out.push(start..t);
                start = t;
            }
        }
        out.push(start..self.len());
        out
    }
}

/// Activations kept for one sequence's backward pass.
pub struct SeqCache {
    segments: Vec<(Range<usize>, SegmentCache)>,
    state_cache: MlpCache,
    lstm_caches: Vec<LstmStepCache>,
    episode_starts: Vec<bool>,
    head_input: Array2<f64>,
    head_mlp_cache: MlpCache,
}

impl Net {
    /// Full-sequence forward with caches. Returns the `t × out` head output.
    pub fn forward_sequence(&self, seq: &SeqInput) -> (Array2<f64>, SeqCache) {
        let t = seq.len();
        let mut x = Array2::zeros((t, FEATURE_DIM + STATE_FEATURES));
        let mut segments = Vec::new();
        for range in seq.segments() {
            let (feat, cache) = self
                .extractor
                .forward_segment(&seq.grids[range.start], &seq.contexts[range.clone()]);
            x.slice_mut(s![range.clone(), ..FEATURE_DIM]).assign(&feat);
            segments.push((range, cache));
        }
        let (s_out, state_cache) = self.state_mlp.forward(&seq.states);
        x.slice_mut(s![.., FEATURE_DIM..]).assign(&s_out);

        let mut state = seq.init.clone();
        let mut lstm_caches = Vec::with_capacity(t);
        let mut h_seq = Array2::zeros((t, LSTM_HIDDEN));
        for ti in 0..t {
            if seq.episode_starts[ti] {
                state.reset_row(0);
            }
            let xt = x.slice(s![ti..=ti, ..]).to_owned();
            let (next, cache) = self.lstm.step(&xt, &state);
            h_seq.row_mut(ti).assign(&next.h.row(0));
            lstm_caches.push(cache);
            state = next;
        }

        let (head_input, head_mlp_cache) = self.head_mlp.forward(&h_seq);
        let out = self.head.forward(&head_input);
        (
            out,
            SeqCache {
                segments,
                state_cache,
                lstm_caches,
                episode_starts: seq.episode_starts.clone(),
                head_input,
                head_mlp_cache,
            },
        )
    }

    /// Backward through one sequence; accumulates parameter gradients.
    pub fn backward_sequence(&mut self, cache: &SeqCache, dout: &Array2<f64>) {
        let t = cache.lstm_caches.len();
        let dhead_input = self.head.backward(&cache.head_input, dout);
        let dh_seq = self.head_mlp.backward(&cache.head_mlp_cache, &dhead_input);

        let mut dx_all = Array2::zeros((t, FEATURE_DIM + STATE_FEATURES));
        let mut dh = Array2::zeros((1, LSTM_HIDDEN));
        let mut dc = Array2::zeros((1, LSTM_HIDDEN));
        for ti in (0..t).rev() {
            let dh_row = &dh + &dh_seq.slice(s![ti..=ti, ..]);
            let (dx_t, dh_prev, dc_prev) = self.lstm.backward_step(&cache.lstm_caches[ti], &dh_row, &dc);
            dx_all.row_mut(ti).assign(&dx_t.row(0));
            if cache.episode_starts[ti] {
                // The state entering this step was zeroed: cut the flow.
                dh.fill(0.0);
                dc.fill(0.0);
            } else {
                dh = dh_prev;
                dc = dc_prev;
            }
        }

        let dstate = dx_all.slice(s![.., FEATURE_DIM..]).to_owned();
        self.state_mlp.backward(&cache.state_cache, &dstate);
        for (range, seg_cache) in &cache.segments {
            let dfeat = dx_all.slice(s![range.clone(), ..FEATURE_DIM]).to_owned();
            self.extractor.backward_segment(seg_cache, &dfeat);
        }
    }
}

impl ParamSet for Net {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = crate::nn::with_prefix("extractor", self.extractor.named_params());
        out.extend(crate::nn::with_prefix("state_mlp", self.state_mlp.named_params()));
        out.extend(crate::nn::with_prefix("lstm", self.lstm.named_params()));
        out.extend(crate::nn::with_prefix("head_mlp", self.head_mlp.named_params()));
        out.extend(crate::nn::with_prefix("head", self.head.named_params()));
        out
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = crate::nn::with_prefix_mut("extractor", self.extractor.named_params_mut());
        out.extend(crate::nn::with_prefix_mut("state_mlp", self.state_mlp.named_params_mut()));
        out.extend(crate::nn::with_prefix_mut("lstm", self.lstm.named_params_mut()));
        out.extend(crate::nn::with_prefix_mut("head_mlp", self.head_mlp.named_params_mut()));
        out.extend(crate::nn::with_prefix_mut("head", self.head.named_params_mut()));
        out
    }
}

/// Policy and value networks plus the action distribution.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub policy: Net,
    pub value: Net,
    pub dist: CategoricalPair,
}

/// Persistent recurrent state for a batch of environments.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub policy: LstmState,
    pub value: LstmState,
}

impl RecurrentState {
    pub fn zeros(envs: usize) -> Self {
        RecurrentState {
            policy: LstmState::zeros(envs, LSTM_HIDDEN),
            value: LstmState::zeros(envs, LSTM_HIDDEN),
        }
    }

    pub fn reset_env(&mut self, i: usize) {
        self.policy.reset_row(i);
        self.value.reset_row(i);
    }
}

/// Per-environment grid-entry caches, keyed by grid version, one per network.
#[derive(Debug, Default)]
pub struct GridCaches {
    policy: Vec<Option<(u64, GridEntry)>>,
    value: Vec<Option<(u64, GridEntry)>>,
}

impl GridCaches {
    pub fn new(envs: usize) -> Self {
        GridCaches {
            policy: (0..envs).map(|_| None).collect(),
            value: (0..envs).map(|_| None).collect(),
        }
    }
}

/// Output of one acting step across the environment batch.
#[derive(Debug, Clone)]
pub struct ActOutput {
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
}

impl ActorCritic {
    pub fn new(kind: ExtractorKind, rng: &mut ChaCha8Rng) -> Self {
        ActorCritic {
            policy: Net::new(kind, POLICY_OUT, 0.01, rng),
            value: Net::new(kind, 1, 1.0, rng),
            dist: CategoricalPair::new(VELOCITY_BINS),
        }
    }

    fn refresh_entries<'a>(
        net: &Net,
        cache: &'a mut [Option<(u64, GridEntry)>],
        obs: &[Observation],
    ) -> Vec<GridEntry> {
        obs.iter()
            .enumerate()
            .map(|(i, o)| {
                let stale = match &cache[i] {
                    Some((v, _)) => *v != o.grid_version,
                    None => true,
                };
                if stale {
                    cache[i] = Some((o.grid_version, net.extractor.grid_entry(&o.grid)));
                }
                cache[i].as_ref().expect("cached").1.clone()
            })
            .collect()
    }

    /// One acting step: sample (or take the mode of) the policy, evaluate the
    /// value function, and advance both recurrent states.
    pub fn act(
        &self,
        obs: &[Observation],
        rec: &mut RecurrentState,
        caches: &mut GridCaches,
        rng: &mut ChaCha8Rng,
        deterministic: bool,
    ) -> ActOutput {
        let p_entries = Self::refresh_entries(&self.policy, &mut caches.policy, obs);
        let v_entries = Self::refresh_entries(&self.value, &mut caches.value, obs);
        let logits = self.policy.act_forward(obs, &p_entries, &mut rec.policy);
        let values = self.value.act_forward(obs, &v_entries, &mut rec.value);
        let pairs = if deterministic {
            self.dist.mode(&logits)
        } else {
            self.dist.sample(&logits, rng)
        };
        let log_probs = self.dist.log_prob(&logits, &pairs);
        ActOutput {
            actions: pairs.iter().map(|&(x, y)| Action::new(x, y)).collect(),
            log_probs: log_probs.to_vec(),
            values: values.column(0).to_vec(),
        }
    }

    /// Value of a single observation against a copy of env `row`'s recurrent
    /// state (no persistent change).
    pub fn peek_value(&self, obs: &Observation, rec: &RecurrentState, row: usize) -> f64 {
        self.value.peek_forward(obs, &rec.value, row)[[0, 0]]
    }
}

impl ParamSet for ActorCritic {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = crate::nn::with_prefix("policy", self.policy.named_params());
        out.extend(crate::nn::with_prefix("value", self.value.named_params()));
        out
    }
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = crate::nn::with_prefix_mut("policy", self.policy.named_params_mut());
        out.extend(crate::nn::with_prefix_mut("value", self.value.named_params_mut()));
        out
    }
}

/// Copy all parameter values from `src` into `dst` (shapes must match).
pub fn copy_params(dst: &mut dyn ParamSet, src: &dyn ParamSet) {
    let from = src.named_params();
    let mut to = dst.named_params_mut();
    assert_eq!(from.len(), to.len(), "parameter lists differ");
    for ((n_from, p_from), (n_to, p_to)) in from.iter().zip(to.iter_mut()) {
        assert_eq!(n_from, n_to, "parameter order mismatch");
        p_to.value.assign(&p_from.value);
    }
}
