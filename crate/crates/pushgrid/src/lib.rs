//! Desk-scale planar pushing stack: a quasi-static 2D pusher-slider simulator
//! with obstacle clutter, an occupancy-grid policy architecture built around
//! location-based attention, a recurrent PPO trainer, and an evaluation bench.
//!
//! The crate is organized bottom-up:
//!
//! - [`scene`]: shapes, poses, workspace, occupancy grids and patch decomposition
//! - [`dynamics`]: single-contact quasi-static pushing with an ellipsoidal limit surface
//! - [`env`]: the RL environment (reset sampling, noise, reward, termination) and its vectorized form
//! - [`nn`]: dense f64 tensors, layers with hand-written reverse-mode gradients, Adam, checkpoints
//! - [`extractors`]: the attention grid encoder plus CNN and flat-MLP alternatives
//! - [`ppo`]: recurrent PPO with categorical action heads and a KL-adaptive learning rate
//! - [`evalbench`]: scripted evaluation scenarios, episode outcomes, reports, trajectory export

pub mod dynamics;
pub mod env;
pub mod error;
pub mod evalbench;
pub mod extractors;
pub mod nn;
pub mod ppo;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
