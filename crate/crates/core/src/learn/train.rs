//! Rollout collection and the two-phase curriculum driver.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::mlp::Mlp;
use super::normalizer::RunningNorm;
use super::policy::{gaussian_log_prob, sample_action, ActorCritic};
use super::ppo::{ppo_update, PpoOptimizer, RolloutBuffer, UpdateStats};
use crate::config::Config;
use crate::contact::TerrainField;
use crate::env::{BipedEnv, CurriculumPhase, Observation, OBS_DIM};
use crate::error::{Error, Result};
use crate::sim::build_planar_biped;

/// Seed of environment `index` in a run seeded with `seed` (splitmix64 mix).
pub fn env_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds `n` environments for `config` in curriculum `phase`, all sharing
/// one pre-generated height field.
pub fn make_envs(config: &Config, phase: CurriculumPhase, n: usize, seed: u64) -> Result<Vec<BipedEnv>> {
    let mut env_cfg = config.env.clone();
    env_cfg.phase = phase;
    let model = build_planar_biped(&config.model)?;
    let terrain = TerrainField::generate(
        &env_cfg.terrain,
        &mut ChaCha8Rng::seed_from_u64(config.train.terrain_seed),
        config.train.terrain_peak,
    );
    (0..n)
        .map(|i| {
            BipedEnv::new(
                env_cfg.clone(),
                model.clone(),
                terrain.clone(),
                env_seed(seed, i as u64),
            )
        })
        .collect()
}

/// Episodes finished during one collection.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeStats {
    pub returns: Vec<f64>,
    pub lengths: Vec<u32>,
    pub step_reward_sum: f64,
    pub steps: u64,
}

impl EpisodeStats {
    pub fn mean_return(&self) -> Option<f64> {
        (!self.returns.is_empty()).then(|| self.returns.iter().sum::<f64>() / self.returns.len() as f64)
    }

    pub fn mean_length(&self) -> Option<f64> {
        (!self.lengths.is_empty())
            .then(|| self.lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / self.lengths.len() as f64)
    }
}

/// Parallel environments with their pending observations and running
/// episode accumulators.
pub struct VecEnv {
    pub envs: Vec<BipedEnv>,
    obs: Vec<Observation>,
    ep_return: Vec<f64>,
    ep_len: Vec<u32>,
}

impl VecEnv {
    pub fn new(mut envs: Vec<BipedEnv>) -> Self {
        let obs = envs.iter_mut().map(|e| e.reset()).collect();
        let n = envs.len();
        Self {
            envs,
            obs,
            ep_return: vec![0.0; n],
            ep_len: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }
}

fn normalize_batch(norm: &RunningNorm, obs: &[Observation], out: &mut Vec<f32>) {
    out.resize(obs.len() * OBS_DIM, 0.0);
    for (o, chunk) in obs.iter().zip(out.chunks_exact_mut(OBS_DIM)) {
        norm.normalize_into(o.as_slice(), chunk);
    }
}

/// Steps every environment `horizon` times with actions sampled from `model`.
/// Episodes auto-reset; timeouts add `γ·V(s_T)` to the final reward.
/// Returns the buffer and the raw observations that were fed to the policy.
pub fn collect_rollouts(
    venv: &mut VecEnv,
    model: &ActorCritic<f32>,
    norm: &RunningNorm,
    horizon: usize,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(RolloutBuffer, Vec<f64>, EpisodeStats)> {
    let n = venv.len();
    let ad = model.action_dim();
    if model.obs_dim() != OBS_DIM || venv.envs.iter().any(|e| e.action_dim() != ad) {
        return Err(Error::Config("policy and environment dimensions differ".into()));
    }
    let mut buf = RolloutBuffer::new(n, horizon, OBS_DIM, ad);
    let mut raw = Vec::with_capacity(n * horizon * OBS_DIM);
    let mut stats = EpisodeStats::default();
    let log_std: Vec<f64> = model.log_std.iter().map(|&v| f64::from(v)).collect();
    let mut x = Vec::new();
    for _ in 0..horizon {
        normalize_batch(norm, &venv.obs, &mut x);
        let (means, values) = model.forward(&x, n)?;
        buf.obs.extend_from_slice(&x);
        for e in 0..n {
            raw.extend_from_slice(venv.obs[e].as_slice());
            let mean: Vec<f64> = means[e * ad..(e + 1) * ad].iter().map(|&v| f64::from(v)).collect();
            let (sampled, _) = sample_action(&mean, &log_std, rng);
            // log-prob of the action exactly as stored
            let action: Vec<f64> = sampled.iter().map(|&a| f64::from(a as f32)).collect();
            let lp = gaussian_log_prob(&action, &mean, &log_std);
            buf.actions.extend(action.iter().map(|&a| a as f32));
            buf.log_probs.push(lp);
            buf.values.push(f64::from(values[e]));

            let out = venv.envs[e].step(&action)?;
            let mut reward = out.reward;
            venv.ep_return[e] += out.reward;
            venv.ep_len[e] += 1;
            stats.step_reward_sum += out.reward;
            stats.steps += 1;
            if out.info.timeout {
                let xs = norm.normalize(out.obs.as_slice());
                reward += gamma * f64::from(model.critic.forward(&xs, 1)?[0]);
            }
            buf.rewards.push(reward);
            buf.dones.push(out.done);
            if out.done {
                stats.returns.push(venv.ep_return[e]);
                stats.lengths.push(venv.ep_len[e]);
                venv.ep_return[e] = 0.0;
                venv.ep_len[e] = 0;
                venv.obs[e] = venv.envs[e].reset();
            } else {
                venv.obs[e] = out.obs;
            }
        }
    }
    normalize_batch(norm, &venv.obs, &mut x);
    let last = model.critic.forward(&x, n)?;
    buf.bootstrap = last.iter().map(|&v| f64::from(v)).collect();
    Ok((buf, raw, stats))
}

/// One row of the reward curve.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub samples: u64,
    pub mean_ep_reward: f64,
    /// Seconds.
    pub mean_ep_len: f64,
    pub episodes: usize,
    pub mean_step_reward: f64,
    pub update: UpdateStats,
    pub lr: f64,
    pub log_std: f64,
    pub seconds: f64,
}

pub const REWARD_CSV_HEADER: [&str; 14] = [
    "iteration",
    "samples",
    "mean_ep_reward",
    "mean_ep_len",
    "episodes",
    "mean_step_reward",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "lr",
    "mean_log_std",
    "seconds",
];

impl IterationLog {
    pub fn record(&self) -> Vec<String> {
        let u = &self.update;
        vec![
            self.iteration.to_string(),
            self.samples.to_string(),
            format!("{:.6}", self.mean_ep_reward),
            format!("{:.4}", self.mean_ep_len),
            self.episodes.to_string(),
            format!("{:.6}", self.mean_step_reward),
            format!("{:.6}", u.loss.policy),
            format!("{:.6}", u.loss.value),
            format!("{:.6}", u.loss.entropy),
            format!("{:.6}", u.loss.approx_kl),
            format!("{:.6}", u.loss.clip_fraction),
            format!("{:.3e}", self.lr),
            format!("{:.4}", self.log_std),
            format!("{:.3}", self.seconds),
        ]
    }
}

/// PPO training state for one curriculum phase.
pub struct Trainer {
    pub config: Config,
    pub phase: CurriculumPhase,
    pub seed: u64,
    pub model: ActorCritic<f32>,
    pub norm: RunningNorm,
    opt: PpoOptimizer,
    venv: VecEnv,
    rng: ChaCha8Rng,
    pub iteration: usize,
    pub samples: u64,
    last_return: f64,
    last_length: f64,
}

/// Copies `ck` into a fresh model for `action_dim` outputs. A six-output
/// checkpoint can seed a seven-output (clock-control) model: the extra head
/// row starts at zero and its log-std at `init_log_std`.
pub fn adapt_checkpoint(ck: &Checkpoint, action_dim: usize, init_log_std: f64) -> Result<ActorCritic<f32>> {
    let src = &ck.model;
    if src.obs_dim() != OBS_DIM {
        return Err(Error::Config(format!(
            "checkpoint observes {} values, env provides {OBS_DIM}",
            src.obs_dim()
        )));
    }
    if src.action_dim() == action_dim {
        return Ok(src.clone());
    }
    if src.action_dim() + 1 != action_dim {
        return Err(Error::Config(format!(
            "checkpoint has {} actions, config needs {action_dim}",
            src.action_dim()
        )));
    }
    let mut sizes = src.actor.sizes().to_vec();
    *sizes.last_mut().unwrap() = action_dim;
    let mut actor = Mlp::<f32>::zeros(&sizes)?;
    let last = actor.num_layers() - 1;
    for l in 0..=last {
        let (sw, sb) = src.actor.layer_range(l);
        let (dw, db) = actor.layer_range(l);
        let (sw, sb) = (src.actor.params()[sw].to_vec(), src.actor.params()[sb].to_vec());
        // weights are row-major out×in, so the old rows are a prefix
        actor.params_mut()[dw.start..dw.start + sw.len()].copy_from_slice(&sw);
        actor.params_mut()[db.start..db.start + sb.len()].copy_from_slice(&sb);
    }
    let mut log_std = src.log_std.clone();
    log_std.push(init_log_std as f32);
    Ok(ActorCritic {
        actor,
        critic: src.critic.clone(),
        log_std,
    })
}

impl Trainer {
    pub fn new(config: &Config, phase: CurriculumPhase, seed: u64, init: Option<&Checkpoint>) -> Result<Self> {
        config.env.validate()?;
        config.ppo.validate()?;
        let mut cfg = config.clone();
        cfg.env.phase = phase;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let action_dim = cfg.env.action_dim();
        let (model, norm) = match init {
            Some(ck) => {
                if ck.model.actor.sizes()[1..ck.model.actor.sizes().len() - 1] != cfg.ppo.hidden[..] {
                    return Err(Error::Config("checkpoint hidden sizes differ from config".into()));
                }
                (
                    adapt_checkpoint(ck, action_dim, cfg.ppo.init_log_std)?,
                    ck.header.obs_norm.clone(),
                )
            }
            None => (
                ActorCritic::new(OBS_DIM, action_dim, &cfg.ppo.hidden, cfg.ppo.init_log_std, &mut rng)?,
                RunningNorm::new(OBS_DIM),
            ),
        };
        let envs = make_envs(&cfg, phase, cfg.ppo.num_envs, seed)?;
        Ok(Self {
            opt: PpoOptimizer::new(&model),
            model,
            norm,
            venv: VecEnv::new(envs),
            rng,
            config: cfg,
            phase,
            seed,
            iteration: 0,
            samples: 0,
            last_return: 0.0,
            last_length: 0.0,
        })
    }

    /// Collects one batch and runs one PPO update at learning rate `lr`.
    pub fn iterate(&mut self, lr: f64) -> Result<IterationLog> {
        let t0 = Instant::now();
        let ppo = self.config.ppo.clone();
        let (mut buf, raw, stats) = collect_rollouts(
            &mut self.venv,
            &self.model,
            &self.norm,
            ppo.horizon,
            ppo.gamma,
            &mut self.rng,
        )?;
        buf.compute_advantages(ppo.gamma, ppo.lambda)?;
        let update = ppo_update(&mut self.model, &mut self.opt, &buf, &ppo, lr, &mut self.rng)?;
        self.norm.update(&raw);
        self.iteration += 1;
        self.samples += buf.len() as u64;
        if let Some(r) = stats.mean_return() {
            self.last_return = r;
        }
        if let Some(l) = stats.mean_length() {
            self.last_length = l / self.config.env.control_rate;
        }
        Ok(IterationLog {
            iteration: self.iteration,
            samples: self.samples,
            mean_ep_reward: self.last_return,
            mean_ep_len: self.last_length,
            episodes: stats.returns.len(),
            mean_step_reward: stats.step_reward_sum / stats.steps.max(1) as f64,
            update,
            lr,
            log_std: self.model.log_std.iter().map(|&v| f64::from(v)).sum::<f64>() / self.model.log_std.len() as f64,
            seconds: t0.elapsed().as_secs_f64(),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.model.clone(),
            self.norm.clone(),
            self.config.env.clock_control,
            self.phase,
            self.iteration,
            self.samples,
            self.seed,
            &self.config,
        )
    }
}

/// Files written by one training phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOutput {
    pub checkpoint: PathBuf,
    pub reward_csv: PathBuf,
    pub final_log: Option<IterationLog>,
}

/// Runs `iterations` PPO iterations of one curriculum phase, writing
/// `policy.ckpt` and `rewards.csv` into `out_dir`.
pub fn train_phase(
    config: &Config,
    phase: CurriculumPhase,
    iterations: usize,
    seed: u64,
    init: Option<&Checkpoint>,
    out_dir: &Path,
    progress: &mut dyn FnMut(&IterationLog),
) -> Result<PhaseOutput> {
    if phase == CurriculumPhase::Randomized && init.is_none() {
        return Err(Error::Config(
            "the randomized phase starts from a flat-phase checkpoint".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut trainer = Trainer::new(config, phase, seed, init)?;
    let reward_csv = out_dir.join("rewards.csv");
    let mut csv = csv::Writer::from_path(&reward_csv)?;
    csv.write_record(REWARD_CSV_HEADER)?;
    let base_lr = config.ppo.learning_rate;
    let every = config.train.checkpoint_every;
    let mut final_log = None;
    for it in 0..iterations {
        let lr = if config.ppo.lr_decay {
            base_lr * (1.0 - it as f64 / iterations as f64)
        } else {
            base_lr
        };
        let log = trainer.iterate(lr)?;
        csv.write_record(log.record())?;
        csv.flush()?;
        progress(&log);
        if every > 0 && (it + 1) % every == 0 && it + 1 < iterations {
            trainer
                .checkpoint()
                .save(&out_dir.join(format!("policy_{:06}.ckpt", it + 1)))?;
        }
        final_log = Some(log);
    }
    let checkpoint = out_dir.join("policy.ckpt");
    trainer.checkpoint().save(&checkpoint)?;
    let mut f = std::fs::File::create(out_dir.join("config.toml"))?;
    f.write_all(trainer.config.to_toml_string().as_bytes())?;
    Ok(PhaseOutput {
        checkpoint,
        reward_csv,
        final_log,
    })
}

/// Flat pretraining in `out_dir/flat`, then randomized finetuning from its
/// weights in `out_dir/randomized`, with the iteration counts from `config.train`.
pub fn train_curriculum(
    config: &Config,
    seed: u64,
    out_dir: &Path,
    progress: &mut dyn FnMut(CurriculumPhase, &IterationLog),
) -> Result<(PhaseOutput, PhaseOutput)> {
    let flat = train_phase(
        config,
        CurriculumPhase::Flat,
        config.train.flat_iterations,
        seed,
        None,
        &out_dir.join("flat"),
        &mut |l| progress(CurriculumPhase::Flat, l),
    )?;
    let base = Checkpoint::load(&flat.checkpoint)?;
    let rand = train_phase(
        config,
        CurriculumPhase::Randomized,
        config.train.randomized_iterations,
        seed,
        Some(&base),
        &out_dir.join("randomized"),
        &mut |l| progress(CurriculumPhase::Randomized, l),
    )?;
    Ok((flat, rand))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        let mut c = Config::default();
        c.ppo.num_envs = 4;
        c.ppo.horizon = 128;
        c.ppo.minibatch = 128;
        c.ppo.hidden = vec![16, 16];
        c.train.flat_iterations = 2;
        c.train.randomized_iterations = 1;
        c
    }

    #[test]
    fn buffer_has_envs_times_horizon() {
        let cfg = small();
        let mut venv = VecEnv::new(make_envs(&cfg, CurriculumPhase::Flat, 4, 1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = ActorCritic::new(OBS_DIM, 6, &[16, 16], -1.0, &mut rng).unwrap();
        let (buf, raw, _) =
            collect_rollouts(&mut venv, &model, &RunningNorm::new(OBS_DIM), 128, 0.99, &mut rng).unwrap();
        assert_eq!(buf.len(), 512);
        assert_eq!(raw.len(), 512 * OBS_DIM);
        buf.check().unwrap();
    }

    #[test]
    fn collection_is_deterministic_and_rewards_bounded() {
        let cfg = small();
        let run = || {
            let mut venv = VecEnv::new(make_envs(&cfg, CurriculumPhase::Randomized, 3, 5).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let model = ActorCritic::new(OBS_DIM, 6, &[16, 16], -1.0, &mut rng).unwrap();
            collect_rollouts(&mut venv, &model, &RunningNorm::new(OBS_DIM), 100, 0.99, &mut rng).unwrap()
        };
        let (a, _, sa) = run();
        let (b, _, _) = run();
        assert_eq!(a, b);
        // bounded except where a timeout bootstrap was folded in
        let raw_max = sa.step_reward_sum / sa.steps as f64;
        assert!((0.0..=0.9).contains(&raw_max));
        for (r, d) in a.rewards.iter().zip(&a.dones) {
            assert!(*r >= 0.0);
            assert!(*r <= 0.9 || *d);
        }
    }

    #[test]
    fn finetune_requires_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let r = train_phase(
            &small(),
            CurriculumPhase::Randomized,
            1,
            0,
            None,
            dir.path(),
            &mut |_| {},
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn curriculum_writes_checkpoints_and_curves() {
        let dir = tempfile::tempdir().unwrap();
        let (flat, rand) = train_curriculum(&small(), 3, dir.path(), &mut |_, _| {}).unwrap();
        let f = Checkpoint::load(&flat.checkpoint).unwrap();
        let r = Checkpoint::load(&rand.checkpoint).unwrap();
        assert_eq!(f.header.phase, CurriculumPhase::Flat);
        assert_eq!(r.header.phase, CurriculumPhase::Randomized);
        assert_eq!(r.header.iterations, 1);
        let text = std::fs::read_to_string(&flat.reward_csv).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("iteration,samples,mean_ep_reward,mean_ep_len"));
    }

    #[test]
    fn same_seed_same_curve() {
        let cfg = small();
        let run = || {
            let mut t = Trainer::new(&cfg, CurriculumPhase::Flat, 4, None).unwrap();
            (0..2).map(|_| t.iterate(3e-4).unwrap().record()).collect::<Vec<_>>()
        };
        let strip = |v: Vec<Vec<String>>| {
            v.into_iter()
                .map(|mut r| {
                    r.pop();
                    r
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(run()), strip(run()));
    }

    #[test]
    fn six_action_checkpoint_seeds_clock_control() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let out = train_phase(&cfg, CurriculumPhase::Flat, 1, 0, None, dir.path(), &mut |_| {}).unwrap();
        let ck = Checkpoint::load(&out.checkpoint).unwrap();
        let m = adapt_checkpoint(&ck, 7, -1.0).unwrap();
        assert_eq!(m.action_dim(), 7);
        let x = vec![0.3f32; OBS_DIM];
        let (a, v) = ck.model.mlp_forward(&x).unwrap();
        let (b, w) = m.mlp_forward(&x).unwrap();
        assert_eq!(&b[..6], &a[..]);
        assert_eq!(b[6], 0.0);
        assert_eq!(v, w);
        assert!(adapt_checkpoint(&ck, 9, -1.0).is_err());
    }
}
