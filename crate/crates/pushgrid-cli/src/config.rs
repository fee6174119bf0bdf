//! Run configuration: everything a training or fine-tuning run needs,
//! loadable from a JSON file and written back (fully resolved, overrides
//! applied) into the run directory before any work starts.

use pushgrid::ppo::PpoConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Trainer hyperparameters; omitted fields use the reference defaults.
    pub ppo: PpoConfig,
    /// Named scenario to train on (converted to its training variant).
    pub scenario: String,
    /// Stop once this many environment steps have been simulated.
    pub total_env_steps: u64,
    /// Write a rolling checkpoint every N optimizer updates.
    pub checkpoint_every_updates: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ppo: PpoConfig::default(),
            scenario: "training".into(),
            total_env_steps: 2_000_000,
            checkpoint_every_updates: 25,
        }
    }
}
