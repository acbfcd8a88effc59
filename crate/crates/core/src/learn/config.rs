use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    /// Linearly anneal the learning rate to zero over the run.
    pub lr_decay: bool,
    pub epochs: usize,
    pub minibatch: usize,
    pub horizon: usize,
    pub num_envs: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            learning_rate: 3e-4,
            lr_decay: true,
            epochs: 4,
            minibatch: 512,
            horizon: 128,
            num_envs: 16,
            entropy_coef: 0.005,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            init_log_std: 0.3f64.ln(),
            hidden: vec![256, 256],
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.horizon * self.num_envs
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::Config("gamma and lambda must lie in (0, 1]".into()));
        }
        if !(self.clip > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("clip and learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.horizon == 0 || self.num_envs == 0 {
            return Err(Error::Config(
                "epochs, minibatch, horizon and num_envs must be >= 1".into(),
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        Ok(())
    }
}

/// Sample budget and bookkeeping for the two curriculum phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// PPO iterations on flat rigid ground.
    pub flat_iterations: usize,
    /// PPO iterations in the randomized phase.
    pub randomized_iterations: usize,
    /// Peak height of the training height field, m.
    pub terrain_peak: f64,
    pub terrain_seed: u64,
    /// Write an intermediate checkpoint every N iterations (0 = only final).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // 2:1 pretrain to finetune ratio
        Self {
            flat_iterations: 2000,
            randomized_iterations: 1000,
            terrain_peak: 0.04,
            terrain_seed: 0,
            checkpoint_every: 0,
        }
    }
}
