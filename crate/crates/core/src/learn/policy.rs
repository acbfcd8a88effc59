//! Gaussian actor-critic built from two MLPs and a state-independent log-std.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, Real};
use crate::error::{Error, Result};

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub log_std: Vec<T>,
}

/// Gradient (or any other per-parameter quantity) laid out like [`ActorCritic`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVec<T> {
    pub actor: Vec<T>,
    pub critic: Vec<T>,
    pub log_std: Vec<T>,
}

impl<T: Real> ParamVec<T> {
    pub fn zeros_like(model: &ActorCritic<T>) -> Self {
        Self {
            actor: vec![T::zero(); model.actor.params().len()],
            critic: vec![T::zero(); model.critic.params().len()],
            log_std: vec![T::zero(); model.log_std.len()],
        }
    }

    pub fn fill_zero(&mut self) {
        for v in [&mut self.actor, &mut self.critic, &mut self.log_std] {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn norm(&self) -> f64 {
        [&self.actor, &self.critic, &self.log_std]
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x.as_f64().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        let s = T::of(s);
        for v in [&mut self.actor, &mut self.critic, &mut self.log_std] {
            v.iter_mut().for_each(|x| *x = *x * s);
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.actor, &self.critic, &self.log_std]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

impl<T: Real> ActorCritic<T> {
    /// Random trunk initialization, near-zero actor head, `log_std` filled with `init_log_std`.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(action_dim);
        sizes.push(1);
        Ok(Self {
            actor: Mlp::init(&actor_sizes, 0.01, rng)?,
            critic: Mlp::init(&sizes, 1.0, rng)?,
            log_std: vec![T::of(init_log_std); action_dim],
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Action means and values for `batch` observations.
    pub fn forward(&self, obs: &[T], batch: usize) -> Result<(Vec<T>, Vec<T>)> {
        Ok((self.actor.forward(obs, batch)?, self.critic.forward(obs, batch)?))
    }

    /// Single-observation forward pass.
    pub fn mlp_forward(&self, obs: &[T]) -> Result<(Vec<T>, T)> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Contract(format!(
                "observation has {} values, expected {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        let (mean, value) = self.forward(obs, 1)?;
        Ok((mean, value[0]))
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ActorCritic<U> {
        ActorCritic {
            actor: self.actor.cast(),
            critic: self.critic.cast(),
            log_std: self.log_std.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Diagonal Gaussian log density.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Entropy of a diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
}

/// Draws `mean + exp(log_std)·ε`, returning the action and its log density.
pub fn sample_action<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + ls.exp() * eps
        })
        .collect();
    let lp = gaussian_log_prob(&action, mean, log_std);
    (action, lp)
}
