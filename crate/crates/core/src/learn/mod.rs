//! MLP actor-critic, PPO with GAE, checkpoints and the two-phase curriculum driver.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod gae;
pub mod mlp;
pub mod normalizer;
pub mod policy;
pub mod ppo;
pub mod train;

pub use checkpoint::{Checkpoint, Policy};
pub use config::{PpoConfig, TrainConfig};
pub use gae::gae;
pub use mlp::{Mlp, Real};
pub use normalizer::RunningNorm;
pub use policy::{sample_action, ActorCritic};
pub use ppo::{ppo_update, RolloutBuffer};
pub use train::{collect_rollouts, train_curriculum, train_phase, Trainer};
