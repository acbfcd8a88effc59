//! Rollout storage and the clipped-surrogate PPO update.

use rand::seq::SliceRandom;
use rand::Rng;

use super::adam::Adam;
use super::config::PpoConfig;
use super::gae::{gae, normalize};
use super::mlp::{MlpCache, Real};
use super::policy::{gaussian_entropy, ActorCritic, ParamVec, LN_2PI};
use crate::error::{Error, Result};

/// Transitions of `num_envs` environments over `horizon` steps, stored
/// time-major (`index = t * num_envs + env`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub num_envs: usize,
    pub horizon: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Normalized observations as seen by the policy.
    pub obs: Vec<f32>,
    pub actions: Vec<f32>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the observation following the last stored step, per env.
    pub bootstrap: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(num_envs: usize, horizon: usize, obs_dim: usize, action_dim: usize) -> Self {
        let n = num_envs * horizon;
        Self {
            num_envs,
            horizon,
            obs_dim,
            action_dim,
            obs: Vec::with_capacity(n * obs_dim),
            actions: Vec::with_capacity(n * action_dim),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            bootstrap: vec![0.0; num_envs],
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Checks that every per-step field has one entry per transition.
    pub fn check(&self) -> Result<()> {
        let n = self.len();
        let ok = n == self.num_envs * self.horizon
            && self.obs.len() == n * self.obs_dim
            && self.actions.len() == n * self.action_dim
            && self.log_probs.len() == n
            && self.values.len() == n
            && self.dones.len() == n
            && self.bootstrap.len() == self.num_envs;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(
                "rollout buffer fields have inconsistent lengths".into(),
            ))
        }
    }

    /// Per-env GAE, then normalizes the advantages over the whole buffer.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        self.check()?;
        let (e_n, h) = (self.num_envs, self.horizon);
        self.advantages = vec![0.0; e_n * h];
        self.returns = vec![0.0; e_n * h];
        for e in 0..e_n {
            let idx: Vec<usize> = (0..h).map(|t| t * e_n + e).collect();
            let r: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let v: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
            let d: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (a, ret) = gae(&r, &v, &d, self.bootstrap[e], gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                self.advantages[i] = a[k];
                self.returns[i] = ret[k];
            }
        }
        normalize(&mut self.advantages);
        Ok(())
    }
}

/// One minibatch view (copied out of the buffer).
#[derive(Clone, Debug, Default)]
pub struct MiniBatch<T> {
    pub obs: Vec<T>,
    pub actions: Vec<T>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl<T: Real> MiniBatch<T> {
    pub fn gather(buf: &RolloutBuffer, idx: &[usize]) -> Self {
        let mut mb = Self::default();
        for &i in idx {
            let o = &buf.obs[i * buf.obs_dim..(i + 1) * buf.obs_dim];
            mb.obs.extend(o.iter().map(|&v| T::of(f64::from(v))));
            let a = &buf.actions[i * buf.action_dim..(i + 1) * buf.action_dim];
            mb.actions.extend(a.iter().map(|&v| T::of(f64::from(v))));
            mb.old_log_probs.push(buf.log_probs[i]);
            mb.advantages.push(buf.advantages[i]);
            mb.returns.push(buf.returns[i]);
        }
        mb
    }

    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Per-sample clipped surrogate `min(r·A, clip(r, 1−ε, 1+ε)·A)` and its
/// derivative with respect to `r`.
pub fn clipped_objective(ratio: f64, adv: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        (clipped, 0.0)
    }
}

/// Workspace reused across minibatches.
#[derive(Default)]
pub struct LossWorkspace<T> {
    actor: MlpCache<T>,
    critic: MlpCache<T>,
}

/// Combined PPO loss `−surrogate + c_v·½(V − R)² − c_e·H` averaged over the
/// minibatch; accumulates its gradient into `grad`.
pub fn ppo_loss<T: Real>(
    model: &ActorCritic<T>,
    mb: &MiniBatch<T>,
    cfg: &PpoConfig,
    ws: &mut LossWorkspace<T>,
    grad: Option<&mut ParamVec<T>>,
) -> Result<LossStats> {
    let n = mb.len();
    let ad = model.action_dim();
    model.actor.forward_cached(&mb.obs, n, &mut ws.actor)?;
    model.critic.forward_cached(&mb.obs, n, &mut ws.critic)?;
    let means = ws.actor.output();
    let values = ws.critic.output();
    let log_std: Vec<f64> = model.log_std.iter().map(|v| v.as_f64()).collect();
    let inv_std: Vec<f64> = log_std.iter().map(|l| (-l).exp()).collect();
    let inv_n = 1.0 / n as f64;

    let mut stats = LossStats::default();
    let mut g_mean = vec![T::zero(); n * ad];
    let mut g_ls = vec![0.0; ad];
    let mut g_value = vec![T::zero(); n];
    let mut z = vec![0.0; ad];
    for s in 0..n {
        let mut lp = 0.0;
        for i in 0..ad {
            let k = s * ad + i;
            z[i] = (mb.actions[k].as_f64() - means[k].as_f64()) * inv_std[i];
            lp += -0.5 * z[i] * z[i] - log_std[i] - 0.5 * LN_2PI;
        }
        let log_ratio = lp - mb.old_log_probs[s];
        let ratio = log_ratio.exp();
        let (obj, d_obj) = clipped_objective(ratio, mb.advantages[s], cfg.clip);
        stats.policy -= obj * inv_n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
        if (ratio - 1.0).abs() > cfg.clip {
            stats.clip_fraction += inv_n;
        }
        let g_lp = -d_obj * ratio * inv_n;
        if g_lp != 0.0 {
            for i in 0..ad {
                g_mean[s * ad + i] = T::of(g_lp * z[i] * inv_std[i]);
                g_ls[i] += g_lp * (z[i] * z[i] - 1.0);
            }
        }
        let err = values[s].as_f64() - mb.returns[s];
        stats.value += 0.5 * err * err * inv_n;
        g_value[s] = T::of(cfg.value_coef * err * inv_n);
    }
    stats.entropy = gaussian_entropy(&log_std);
    stats.total = stats.policy + cfg.value_coef * stats.value - cfg.entropy_coef * stats.entropy;
    if !stats.total.is_finite() {
        return Err(Error::TrainingDiverged(format!("non-finite PPO loss {stats:?}")));
    }
    if let Some(grad) = grad {
        model.actor.backward(&ws.actor, &g_mean, &mut grad.actor, false);
        model.critic.backward(&ws.critic, &g_value, &mut grad.critic, false);
        for i in 0..ad {
            grad.log_std[i] = grad.log_std[i] + T::of(g_ls[i] - cfg.entropy_coef);
        }
    }
    Ok(stats)
}

/// Adam state for the three parameter groups.
#[derive(Clone, Debug)]
pub struct PpoOptimizer {
    actor: Adam,
    critic: Adam,
    log_std: Adam,
}

impl PpoOptimizer {
    pub fn new<T: Real>(model: &ActorCritic<T>) -> Self {
        Self {
            actor: Adam::new(model.actor.params().len()),
            critic: Adam::new(model.critic.params().len()),
            log_std: Adam::new(model.log_std.len()),
        }
    }

    pub fn step<T: Real>(&mut self, model: &mut ActorCritic<T>, grad: &ParamVec<T>, lr: f64) {
        self.actor.step(model.actor.params_mut(), &grad.actor, lr);
        self.critic.step(model.critic.params_mut(), &grad.critic, lr);
        self.log_std.step(&mut model.log_std, &grad.log_std, lr);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// `epochs` passes of shuffled minibatch Adam steps on the clipped PPO loss.
/// A non-finite loss or gradient aborts the update and leaves `model`
/// untouched.
pub fn ppo_update<T: Real, R: Rng + ?Sized>(
    model: &mut ActorCritic<T>,
    opt: &mut PpoOptimizer,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut R,
) -> Result<UpdateStats> {
    buf.check()?;
    if buf.advantages.len() != buf.len() || buf.returns.len() != buf.len() {
        return Err(Error::Contract("advantages not computed".into()));
    }
    let mut candidate = model.clone();
    let mut candidate_opt = opt.clone();
    let mut idx: Vec<usize> = (0..buf.len()).collect();
    let mut grad = ParamVec::zeros_like(model);
    let mut ws = LossWorkspace::default();
    let mut stats = UpdateStats::default();
    let mb_size = cfg.minibatch.min(buf.len()).max(1);
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(mb_size) {
            let mb = MiniBatch::<T>::gather(buf, chunk);
            grad.fill_zero();
            let l = ppo_loss(&candidate, &mb, cfg, &mut ws, Some(&mut grad))?;
            let norm = grad.norm();
            if !norm.is_finite() {
                return Err(Error::TrainingDiverged("non-finite gradient".into()));
            }
            if cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm {
                grad.scale(cfg.max_grad_norm / norm);
            }
            candidate_opt.step(&mut candidate, &grad, lr);
            stats.minibatches += 1;
            let w = 1.0 / stats.minibatches as f64;
            let acc = |a: &mut f64, b: f64| *a += (b - *a) * w;
            acc(&mut stats.loss.total, l.total);
            acc(&mut stats.loss.policy, l.policy);
            acc(&mut stats.loss.value, l.value);
            acc(&mut stats.loss.entropy, l.entropy);
            acc(&mut stats.loss.approx_kl, l.approx_kl);
            acc(&mut stats.loss.clip_fraction, l.clip_fraction);
            acc(&mut stats.grad_norm, norm);
        }
    }
    if !candidate.is_finite() {
        return Err(Error::TrainingDiverged("non-finite parameters after update".into()));
    }
    *model = candidate;
    *opt = candidate_opt;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::policy::sample_action;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(rng: &mut ChaCha8Rng) -> (ActorCritic<f64>, MiniBatch<f64>) {
        let mut model = ActorCritic::<f64>::new(8, 3, &[8, 8], -0.5, rng).unwrap();
        // larger head so the policy actually depends on the input
        for p in model.actor.params_mut() {
            *p *= 1.0 + rng.gen_range(0.0..3.0);
        }
        let n = 16;
        let mut mb = MiniBatch::default();
        for _ in 0..n {
            let o: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (mean, _) = model.mlp_forward(&o).unwrap();
            let (a, lp) = sample_action(&mean, &[-0.5; 3], rng);
            mb.obs.extend(o);
            mb.actions.extend(a);
            // perturbed behaviour log-probs put some samples outside the clip range
            mb.old_log_probs.push(lp + rng.gen_range(-0.4..0.4));
            mb.advantages.push(rng.gen_range(-1.0..1.0));
            mb.returns.push(rng.gen_range(-1.0..1.0));
        }
        (model, mb)
    }

    #[test]
    fn identical_policy_has_unit_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (model, mut mb) = toy(&mut rng);
        for s in 0..mb.len() {
            let o = &mb.obs[s * 8..s * 8 + 8];
            let (mean, _) = model.mlp_forward(o).unwrap();
            let a = &mb.actions[s * 3..s * 3 + 3];
            mb.old_log_probs[s] = crate::learn::policy::gaussian_log_prob(a, &mean, &[-0.5; 3]);
        }
        let stats = ppo_loss(&model, &mb, &PpoConfig::default(), &mut LossWorkspace::default(), None).unwrap();
        assert!(stats.approx_kl.abs() < 1e-12);
        assert_eq!(stats.clip_fraction, 0.0);
        let mean_adv = mb.advantages.iter().sum::<f64>() / mb.len() as f64;
        assert!((stats.policy + mean_adv).abs() < 1e-12);
    }

    #[test]
    fn clipped_objective_bounds() {
        for &r in &[0.1, 0.7, 0.8, 1.0, 1.2, 1.3, 3.0] {
            for &a in &[-2.0, -0.5, 0.0, 0.5, 2.0] {
                let (obj, _) = clipped_objective(r, a, 0.2);
                assert!(obj <= r * a + 1e-15);
                assert!(obj <= r.clamp(0.8, 1.2) * a + 1e-15);
            }
        }
        assert_eq!(clipped_objective(1.5, 1.0, 0.2), (1.2, 0.0));
        assert_eq!(clipped_objective(0.5, -1.0, 0.2), (-0.8, 0.0));
        assert_eq!(clipped_objective(0.5, 1.0, 0.2), (0.5, 1.0));
    }

    #[test]
    fn zero_advantage_leaves_actor_gradient_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (model, mut mb) = toy(&mut rng);
        mb.advantages.iter_mut().for_each(|a| *a = 0.0);
        let mut g = ParamVec::zeros_like(&model);
        let cfg = PpoConfig {
            entropy_coef: 0.0,
            ..Default::default()
        };
        ppo_loss(&model, &mb, &cfg, &mut LossWorkspace::default(), Some(&mut g)).unwrap();
        assert!(g.actor.iter().all(|&v| v == 0.0));
        assert!(g.log_std.iter().all(|&v| v == 0.0));
        assert!(g.critic.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (model, mb) = toy(&mut rng);
        let cfg = PpoConfig::default();
        let mut ws = LossWorkspace::default();
        let mut g = ParamVec::zeros_like(&model);
        let base = ppo_loss(&model, &mb, &cfg, &mut ws, Some(&mut g)).unwrap();
        assert!(base.clip_fraction > 0.0 && base.clip_fraction < 1.0);
        let h = 1e-6;
        let loss = |m: &ActorCritic<f64>, ws: &mut LossWorkspace<f64>| ppo_loss(m, &mb, &cfg, ws, None).unwrap().total;
        let check = |fd: f64, an: f64, what: &str| {
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
            assert!(rel < 1e-4 || (fd - an).abs() < 1e-9, "{what}: fd {fd} vs analytic {an}");
        };
        for i in 0..model.actor.params().len() {
            let mut m = model.clone();
            m.actor.params_mut()[i] += h;
            let up = loss(&m, &mut ws);
            m.actor.params_mut()[i] -= 2.0 * h;
            let down = loss(&m, &mut ws);
            check((up - down) / (2.0 * h), g.actor[i], &format!("actor {i}"));
        }
        for i in 0..model.critic.params().len() {
            let mut m = model.clone();
            m.critic.params_mut()[i] += h;
            let up = loss(&m, &mut ws);
            m.critic.params_mut()[i] -= 2.0 * h;
            let down = loss(&m, &mut ws);
            check((up - down) / (2.0 * h), g.critic[i], &format!("critic {i}"));
        }
        for i in 0..3 {
            let mut m = model.clone();
            m.log_std[i] += h;
            let up = loss(&m, &mut ws);
            m.log_std[i] -= 2.0 * h;
            let down = loss(&m, &mut ws);
            check((up - down) / (2.0 * h), g.log_std[i], &format!("log_std {i}"));
        }
    }

    fn synthetic_buffer(rng: &mut ChaCha8Rng, model: &ActorCritic<f64>) -> RolloutBuffer {
        let (envs, horizon) = (4, 32);
        let mut buf = RolloutBuffer::new(envs, horizon, 8, 3);
        for _ in 0..envs * horizon {
            let o: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (mean, v) = model.mlp_forward(&o).unwrap();
            let ls: Vec<f64> = model.log_std.clone();
            let (a, lp) = sample_action(&mean, &ls, rng);
            // reward prefers positive first action component
            buf.rewards.push(a[0] - o[0]);
            buf.obs.extend(o.iter().map(|&x| x as f32));
            buf.actions.extend(a.iter().map(|&x| x as f32));
            buf.log_probs.push(lp);
            buf.values.push(v);
            buf.dones.push(rng.gen_bool(0.1));
        }
        buf
    }

    #[test]
    fn update_decreases_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = ActorCritic::<f64>::new(8, 3, &[16, 16], -0.5, &mut rng).unwrap();
        let mut buf = synthetic_buffer(&mut rng, &model);
        buf.compute_advantages(0.99, 0.95).unwrap();
        let cfg = PpoConfig {
            epochs: 1,
            minibatch: 128,
            ..Default::default()
        };
        let all: Vec<usize> = (0..buf.len()).collect();
        let mb = MiniBatch::<f64>::gather(&buf, &all);
        let mut ws = LossWorkspace::default();
        let before = ppo_loss(&model, &mb, &cfg, &mut ws, None).unwrap().total;
        let mut opt = PpoOptimizer::new(&model);
        ppo_update(&mut model, &mut opt, &buf, &cfg, 1e-3, &mut rng).unwrap();
        let after = ppo_loss(&model, &mb, &cfg, &mut ws, None).unwrap().total;
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn advantages_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = ActorCritic::<f64>::new(8, 3, &[16, 16], -0.5, &mut rng).unwrap();
        let mut buf = synthetic_buffer(&mut rng, &model);
        buf.compute_advantages(0.99, 0.95).unwrap();
        let n = buf.len() as f64;
        let mean = buf.advantages.iter().sum::<f64>() / n;
        let std = (buf.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nan_loss_aborts_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = ActorCritic::<f64>::new(8, 3, &[16, 16], -0.5, &mut rng).unwrap();
        let mut buf = synthetic_buffer(&mut rng, &model);
        buf.compute_advantages(0.99, 0.95).unwrap();
        buf.returns[3] = f64::NAN;
        let before = model.clone();
        let mut opt = PpoOptimizer::new(&model);
        let r = ppo_update(&mut model, &mut opt, &buf, &PpoConfig::default(), 1e-3, &mut rng);
        assert!(matches!(r, Err(Error::TrainingDiverged(_))));
        assert_eq!(model, before);
    }

    #[test]
    fn inconsistent_buffer_is_rejected() {
        let mut buf = RolloutBuffer::new(2, 2, 1, 1);
        buf.rewards = vec![0.0; 3];
        assert!(buf.compute_advantages(0.99, 0.95).is_err());
    }
}
