//! Evaluation scenarios and the deterministic episode runner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::contact::TerrainField;
use crate::env::{
    BipedEnv, CommandSchedule, ComplianceMode, CurriculumPhase, ModeCommand, StepInfo, TerminationReason,
};
use crate::error::{Error, Result};
use crate::learn::Policy;
use crate::sim::build_planar_biped;

/// Seed of the evaluation height field; shared by every policy and height so
/// that heights only rescale one obstacle layout.
pub const EVAL_TERRAIN_SEED: u64 = 20_240_601;

/// Conditions of one evaluation cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    /// Peak obstacle height, m (0 = flat).
    pub height: f64,
    pub compliance: ComplianceMode,
    pub commands: CommandSchedule,
    pub terminate: bool,
    /// Episode cap in control steps.
    pub steps: u32,
}

impl Scenario {
    /// Episode-length protocol: 1 s standing, then Forward at 0.3 m/s, 10 s cap.
    pub fn sweep(height: f64, compliance_randomized: bool) -> Self {
        Self {
            height,
            compliance: if compliance_randomized {
                ComplianceMode::Randomized
            } else {
                ComplianceMode::Rigid
            },
            commands: CommandSchedule::Fixed {
                standing_time: 1.0,
                command: ModeCommand::forward(0.3),
            },
            terminate: true,
            steps: 400,
        }
    }

    pub fn with_compliance(mut self, c: ComplianceMode) -> Self {
        self.compliance = c;
        self
    }
}

/// Builds the evaluation environment for a policy trained with `config`.
pub fn scenario_env(config: &Config, scenario: &Scenario, seed: u64) -> Result<BipedEnv> {
    if !(scenario.height >= 0.0) {
        return Err(Error::Config(format!("height must be >= 0, got {}", scenario.height)));
    }
    let mut env_cfg = config.env.clone();
    env_cfg.phase = CurriculumPhase::Randomized;
    env_cfg.commands = scenario.commands;
    env_cfg.terminate = scenario.terminate;
    env_cfg.episode_steps = scenario.steps;
    env_cfg.init_noise = 0.0;
    let r = &mut env_cfg.randomization;
    r.terrain = false;
    r.dynamics = false;
    r.compliance = match scenario.compliance {
        // rigid is the default contact time constant
        ComplianceMode::Rigid => ComplianceMode::Fixed(env_cfg.contact.time_constant),
        other => other,
    };
    r.fixed_terrain_z = (scenario.height > 0.0).then_some(0.0);
    let model = build_planar_biped(&config.model)?;
    let terrain = TerrainField::generate(
        &env_cfg.terrain,
        &mut ChaCha8Rng::seed_from_u64(EVAL_TERRAIN_SEED),
        scenario.height,
    );
    BipedEnv::new(env_cfg, model, terrain, seed)
}

/// Outcome of one evaluation episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    /// Seconds survived.
    pub length: f64,
    pub termination: Option<TerminationReason>,
    pub total_reward: f64,
}

/// Runs `policy` deterministically until the episode ends; `on_step` sees
/// every step.
pub fn run_episode(
    policy: &Policy,
    env: &mut BipedEnv,
    seed: u64,
    on_step: &mut dyn FnMut(&StepInfo, f64),
) -> Result<EpisodeRecord> {
    if policy.action_dim() != env.action_dim() {
        return Err(Error::Config(format!(
            "policy has {} actions, environment expects {}",
            policy.action_dim(),
            env.action_dim()
        )));
    }
    let mut obs = env.reset();
    let mut total = 0.0;
    loop {
        let action = policy.act(&obs)?;
        let out = env.step(&action)?;
        total += out.reward;
        on_step(&out.info, out.reward);
        obs = out.obs;
        if out.done {
            return Ok(EpisodeRecord {
                seed,
                length: f64::from(out.info.step + 1) / env.config().control_rate,
                termination: out.info.termination,
                total_reward: total,
            });
        }
    }
}
