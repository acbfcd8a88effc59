//! Terrain-robust bipedal locomotion learning on a planar biped.
//!
//! * [`sim`]: articulated planar dynamics with PD actuation and joint friction.
//! * [`contact`]: soft foot contact and the height-field terrain.
//! * [`env`]: clock-driven RL environment with curriculum randomization.
//! * [`learn`]: MLP actor-critic, PPO with GAE, checkpoints and the curriculum driver.
//! * [`eval`]: evaluation sweeps, ablations and gait analyses.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod contact;
pub mod env;
pub mod error;
pub mod eval;
pub mod learn;
pub mod sim;

pub use error::{Error, Result};
