//! Versioned binary training checkpoints.
//!
//! Layout: an 8-byte magic, a format version, a JSON metadata block (config,
//! scenario, optimizer scalars, RNG states, environment snapshots, episode
//! bookkeeping, and a tensor directory), then every tensor's elements as raw
//! little-endian f64 in directory order. Floats in the JSON block parse back
//! to the exact bits they were written from, so a save/load cycle resumes
//! training bit-identically.

use crate::env::{EnvSnapshot, Observation, ScenarioSpec, Termination, VecEnv};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamSnapshot, LstmState, MomentEntry, ParamSet};
use crate::ppo::net::{ActorCritic, GridCaches, RecurrentState};
use crate::ppo::{EpisodeStat, PpoConfig, Trainer};
use crate::rng::{substream, RngState};
use crate::scene::{Pose2D, Vec2};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"PGRIDCKP";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamScalars {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObsRecord {
    object_pose: Pose2D,
    target_pose: Pose2D,
    pusher_pos: Vec2,
    grid_version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EpisodeRecord {
    ret: f64,
    len: u64,
    termination: Termination,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    config: PpoConfig,
    scenario: ScenarioSpec,
    adam: AdamScalars,
    act_rng: RngState,
    update_rng: RngState,
    env_snapshots: Vec<EnvSnapshot>,
    pending_obs: Vec<ObsRecord>,
    episode_starts: Vec<bool>,
    running_returns: Vec<f64>,
    running_lengths: Vec<u64>,
    recent_episodes: Vec<EpisodeRecord>,
    env_steps: u64,
    updates: u64,
    episodes_completed: u64,
    tensors: Vec<TensorInfo>,
}

/// Write a complete training checkpoint.
pub fn save(trainer: &Trainer, path: &Path) -> Result<()> {
    let adam_snap = trainer.opt.snapshot();
    let mut tensors: Vec<(String, &Array2<f64>)> = Vec::new();
    let params = trainer.nets.named_params();
    for (name, p) in &params {
        tensors.push((format!("param.{name}"), &p.value));
    }
    // Moment tensors are owned by the snapshot; collect them separately.
    let moment_arrays: Vec<(String, Array2<f64>, Array2<f64>)> = adam_snap
        .moments
        .iter()
        .map(|m| {
            let shape = (m.rows, m.cols);
            (
                m.name.clone(),
                Array2::from_shape_vec(shape, m.m.clone()).expect("moment shape"),
                Array2::from_shape_vec(shape, m.v.clone()).expect("moment shape"),
            )
        })
        .collect();
    for (name, m, v) in &moment_arrays {
        tensors.push((format!("adam.m.{name}"), m));
        tensors.push((format!("adam.v.{name}"), v));
    }
    tensors.push(("rec.policy.h".into(), &trainer.rec.policy.h));
    tensors.push(("rec.policy.c".into(), &trainer.rec.policy.c));
    tensors.push(("rec.value.h".into(), &trainer.rec.value.h));
    tensors.push(("rec.value.c".into(), &trainer.rec.value.c));

    let meta = Meta {
        config: trainer.config.clone(),
        scenario: trainer.scenario.clone(),
        adam: AdamScalars {
            lr: adam_snap.lr,
            beta1: adam_snap.beta1,
            beta2: adam_snap.beta2,
            eps: adam_snap.eps,
            steps: adam_snap.steps,
        },
        act_rng: trainer.act_rng_state(),
        update_rng: trainer.update_rng_state(),
        env_snapshots: trainer.envs.snapshots(),
        pending_obs: trainer
            .obs
            .iter()
            .map(|o| ObsRecord {
                object_pose: o.object_pose,
                target_pose: o.target_pose,
                pusher_pos: o.pusher_pos,
                grid_version: o.grid_version,
            })
            .collect(),
        episode_starts: trainer.episode_starts.clone(),
        running_returns: trainer.running_returns.clone(),
        running_lengths: trainer.running_lengths.clone(),
        recent_episodes: trainer
            .recent_episodes
            .iter()
            .map(|e| EpisodeRecord {
                ret: e.ret,
                len: e.len,
                termination: e.termination,
            })
            .collect(),
        env_steps: trainer.env_steps,
        updates: trainer.updates,
        episodes_completed: trainer.episodes_completed,
        tensors: tensors
            .iter()
            .map(|(name, a)| TensorInfo {
                name: name.clone(),
                rows: a.nrows(),
                cols: a.ncols(),
            })
            .collect(),
    };

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    let meta_bytes = serde_json::to_vec(&meta)?;
    w.write_u64::<LittleEndian>(meta_bytes.len() as u64)?;
    w.write_all(&meta_bytes)?;
    for (_, a) in &tensors {
        for v in a.iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Loaded {
    meta: Meta,
    tensors: Vec<(String, Array2<f64>)>,
}

fn read_all(path: &Path) -> Result<Loaded> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CheckpointFormat("bad magic bytes".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointFormat(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let meta_len = r.read_u64::<LittleEndian>()? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)?;
    let meta: Meta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::CheckpointFormat(format!("metadata block: {e}")))?;
    let mut tensors = Vec::with_capacity(meta.tensors.len());
    for info in &meta.tensors {
        let n = info.rows * info.cols;
        let mut data = vec![0.0f64; n];
        r.read_f64_into::<LittleEndian>(&mut data)?;
        let arr = Array2::from_shape_vec((info.rows, info.cols), data)
            .map_err(|e| Error::CheckpointFormat(format!("tensor {}: {e}", info.name)))?;
        tensors.push((info.name.clone(), arr));
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::CheckpointFormat("trailing bytes after tensors".into()));
    }
    Ok(Loaded { meta, tensors })
}

fn take_tensor(tensors: &mut Vec<(String, Array2<f64>)>, name: &str) -> Result<Array2<f64>> {
    let idx = tensors
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::CheckpointMismatch(format!("missing tensor '{name}'")))?;
    Ok(tensors.swap_remove(idx).1)
}

fn assign_params(nets: &mut ActorCritic, tensors: &mut Vec<(String, Array2<f64>)>) -> Result<()> {
    for (name, p) in nets.named_params_mut() {
        let t = take_tensor(tensors, &format!("param.{name}"))?;
        if t.dim() != p.value.dim() {
            return Err(Error::CheckpointMismatch(format!(
                "tensor 'param.{name}' has shape {:?}, expected {:?}",
                t.dim(),
                p.value.dim()
            )));
        }
        p.value = t;
    }
    Ok(())
}

fn rebuild_optimizer(
    adam: &AdamScalars,
    nets: &ActorCritic,
    tensors: &mut Vec<(String, Array2<f64>)>,
) -> Result<Adam> {
    // A checkpoint written before the first update has no moments.
    let moments: Vec<MomentEntry> = if adam.steps == 0 {
        Vec::new()
    } else {
        nets.named_params()
            .iter()
            .map(|(name, p)| {
                let m = take_tensor(tensors, &format!("adam.m.{name}"))?;
                let v = take_tensor(tensors, &format!("adam.v.{name}"))?;
                Ok(MomentEntry {
                    name: name.clone(),
                    rows: p.value.nrows(),
                    cols: p.value.ncols(),
                    m: m.into_raw_vec_and_offset().0,
                    v: v.into_raw_vec_and_offset().0,
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Adam::from_snapshot(&AdamSnapshot {
        lr: adam.lr,
        beta1: adam.beta1,
        beta2: adam.beta2,
        eps: adam.eps,
        steps: adam.steps,
        moments,
    }))
}

/// Rebuild only the networks (evaluation does not need envs or optimizer).
pub fn load_nets(path: &Path) -> Result<(PpoConfig, ScenarioSpec, ActorCritic)> {
    let Loaded { meta, mut tensors } = read_all(path)?;
    let mut init_rng = substream(meta.config.seed, "init");
    let mut nets = ActorCritic::new(meta.config.extractor, &mut init_rng);
    assign_params(&mut nets, &mut tensors)?;
    Ok((meta.config, meta.scenario, nets))
}

/// Rebuild networks together with the optimizer (moments, adapted learning
/// rate, step count) so a fine-tuning run continues where the source run's
/// optimizer left off.
pub fn load_nets_and_optimizer(path: &Path) -> Result<(PpoConfig, ScenarioSpec, ActorCritic, Adam)> {
    let Loaded { meta, mut tensors } = read_all(path)?;
    let mut init_rng = substream(meta.config.seed, "init");
    let mut nets = ActorCritic::new(meta.config.extractor, &mut init_rng);
    assign_params(&mut nets, &mut tensors)?;
    let opt = rebuild_optimizer(&meta.adam, &nets, &mut tensors)?;
    Ok((meta.config, meta.scenario, nets, opt))
}

/// Rebuild a full trainer that resumes bit-identically.
pub fn load(path: &Path) -> Result<Trainer> {
    let Loaded { meta, mut tensors } = read_all(path)?;
    let n = meta.config.n_envs;
    if meta.env_snapshots.len() != n || meta.pending_obs.len() != n {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint carries {} environments but the config says {n}",
            meta.env_snapshots.len()
        )));
    }

    let mut init_rng = substream(meta.config.seed, "init");
    let mut nets = ActorCritic::new(meta.config.extractor, &mut init_rng);
    assign_params(&mut nets, &mut tensors)?;

    let opt = rebuild_optimizer(&meta.adam, &nets, &mut tensors)?;

    let rec = RecurrentState {
        policy: LstmState {
            h: take_tensor(&mut tensors, "rec.policy.h")?,
            c: take_tensor(&mut tensors, "rec.policy.c")?,
        },
        value: LstmState {
            h: take_tensor(&mut tensors, "rec.value.h")?,
            c: take_tensor(&mut tensors, "rec.value.c")?,
        },
    };
    if rec.policy.h.nrows() != n {
        return Err(Error::CheckpointMismatch(
            "recurrent state row count does not match n_envs".into(),
        ));
    }

    let envs = VecEnv::restore(meta.scenario.clone(), meta.env_snapshots);
    let obs: Vec<Observation> = meta
        .pending_obs
        .iter()
        .enumerate()
        .map(|(i, rec_obs)| Observation {
            object_pose: rec_obs.object_pose,
            target_pose: rec_obs.target_pose,
            pusher_pos: rec_obs.pusher_pos,
            grid: std::sync::Arc::clone(envs.env(i).grid()),
            grid_version: rec_obs.grid_version,
        })
        .collect();

    Ok(Trainer {
        caches: GridCaches::new(n),
        act_rng: meta.act_rng.restore(),
        update_rng: meta.update_rng.restore(),
        episode_starts: meta.episode_starts,
        running_returns: meta.running_returns,
        running_lengths: meta.running_lengths,
        recent_episodes: meta
            .recent_episodes
            .into_iter()
            .map(|e| EpisodeStat {
                ret: e.ret,
                len: e.len,
                termination: e.termination,
            })
            .collect::<VecDeque<_>>(),
        env_steps: meta.env_steps,
        updates: meta.updates,
        episodes_completed: meta.episodes_completed,
        config: meta.config,
        scenario: meta.scenario,
        nets,
        opt,
        envs,
        obs,
        rec,
    })
}
