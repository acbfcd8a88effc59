use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::clock::{phase_coefficients, GaitClock, MAX_PHASE_OFFSET};
use super::config::{CommandSchedule, ComplianceMode, EnvConfig};
use super::mode::{transition_allowed, ModeCommand, ModeSwitcher};
use super::randomize::{event_probability, randomize_dynamics};
use super::reward::{compute_reward, RewardBreakdown, RewardInputs};
use super::termination::{check_termination, TerminationReason};
use crate::contact::{contact_force, sample_compliance, ContactParams, TerrainField};
use crate::error::{Error, Result};
use crate::sim::{
    forward_kinematics, joint_friction, pd_torque, step_dynamics, ForceModel, Kinematics, Loads, PointLoad, RobotModel,
    RobotState, Side, NUM_CONTACT_POINTS, NUM_JOINTS,
};

pub const OBS_DIM: usize = 26;

/// Fixed-layout policy input:
/// `[pitch, pitch_rate, q×6, qdot×6, torque×6, mode×3, reference, sin, cos]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn clock(&self) -> (f64, f64) {
        (self.0[24], self.0[25])
    }

    pub fn mode_one_hot(&self) -> [f64; 3] {
        [self.0[20], self.0[21], self.0[22]]
    }
}

/// Diagnostics of one control step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// Index of the control step just taken (0-based).
    pub step: u32,
    /// Phase during the step (the one the policy observed).
    pub phi: u32,
    /// Raw phase offset request after tanh scaling, before rounding.
    pub phase_action: f64,
    /// Integer offset actually applied to the phase.
    pub phase_offset: i64,
    pub command: ModeCommand,
    pub breakdown: RewardBreakdown,
    pub termination: Option<TerminationReason>,
    pub timeout: bool,
    /// Step-averaged vertical ground reaction force `[right, left]`, N.
    pub grf: [f64; 2],
    pub grf_tangential: [f64; 2],
    pub root_pose: [f64; 3],
    pub root_vel: [f64; 3],
    pub compliance: [f64; 2],
    pub terrain_offset: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Loads for one physics substep: PD tracking, joint friction and soft contacts.
struct SubstepForces<'a> {
    q_des: [f64; NUM_JOINTS],
    terrain: &'a TerrainField,
    contact: [ContactParams; 2],
    /// Numerator of the per-contact effective mass.
    contact_mass: f64,
    pd: [f64; NUM_JOINTS],
    normal: [f64; 2],
    tangential: [f64; 2],
}

impl ForceModel for SubstepForces<'_> {
    fn loads(&mut self, model: &RobotModel, state: &RobotState, kin: &Kinematics) -> Loads {
        let mut loads = Loads::default();
        for j in 0..NUM_JOINTS {
            let joint = &model.joints[j];
            let raw = joint.gains.kp * (self.q_des[j] - state.q[j]) - joint.gains.kd * state.qdot[j];
            let tau = pd_torque(
                joint.gains,
                self.q_des[j],
                state.q[j],
                state.qdot[j],
                joint.torque_limit,
            );
            self.pd[j] = tau;
            let friction = model.friction[j];
            loads.joint_torque[j] = tau + joint_friction(friction, state.qdot[j]);
            loads.joint_damping[j] = crate::sim::actuation::joint_friction_damping(friction, state.qdot[j]);
            if raw.abs() < joint.torque_limit {
                loads.joint_damping[j] += joint.gains.kd;
                loads.joint_stiffness[j] = joint.gains.kp;
            }
        }

        let mut penetration = [0.0; NUM_CONTACT_POINTS];
        let mut active = 0usize;
        for (k, p) in kin.points.iter().enumerate() {
            penetration[k] = self.terrain.height_at(p.pos[0]) - p.pos[1];
            if penetration[k] > 0.0 {
                active += 1;
            }
        }
        self.normal = [0.0; 2];
        self.tangential = [0.0; 2];
        if active > 0 {
            let m_eff = self.contact_mass / active as f64;
            for (k, p) in kin.points.iter().enumerate() {
                if penetration[k] <= 0.0 {
                    continue;
                }
                let side = model.contact_points[k].side.index();
                let cf = contact_force(&self.contact[side], penetration[k], p.vel[1], p.vel[0], m_eff);
                loads.points[k] = PointLoad {
                    force: [cf.tangential, cf.normal],
                    damping: [cf.tangent_damping, cf.normal_damping],
                    stiffness: [0.0, cf.normal_stiffness],
                };
                self.normal[side] += cf.normal;
                self.tangential[side] += cf.tangential;
            }
        }
        loads
    }
}

/// The locomotion environment: one planar biped on one terrain.
#[derive(Clone, Debug)]
pub struct BipedEnv {
    config: EnvConfig,
    base_model: RobotModel,
    model: RobotModel,
    terrain: TerrainField,
    state: RobotState,
    clock: GaitClock,
    command: ModeCommand,
    switcher: ModeSwitcher,
    compliance: [f64; 2],
    rng: ChaCha8Rng,
    steps: u32,
    last_grf: [f64; 2],
}

impl BipedEnv {
    pub fn new(config: EnvConfig, model: RobotModel, terrain: TerrainField, seed: u64) -> Result<Self> {
        config.validate()?;
        let state = RobotState::nominal(&model, model.nominal_root_height);
        let compliance = [config.contact.time_constant; 2];
        let mut env = Self {
            clock: GaitClock::new(config.cycle_period),
            config,
            base_model: model.clone(),
            model,
            terrain,
            state,
            command: ModeCommand::STANDING,
            switcher: ModeSwitcher::default(),
            compliance,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            last_grf: [0.0; 2],
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn base_model(&self) -> &RobotModel {
        &self.base_model
    }

    pub fn terrain(&self) -> &TerrainField {
        &self.terrain
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn clock(&self) -> GaitClock {
        self.clock
    }

    pub fn command(&self) -> ModeCommand {
        self.command
    }

    pub fn compliance(&self) -> [f64; 2] {
        self.compliance
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn action_dim(&self) -> usize {
        self.config.action_dim()
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Overrides the current command, bypassing switching rules.
    pub fn set_command(&mut self, command: ModeCommand) {
        self.command = command;
        self.switcher.clear();
    }

    /// Replaces the physical state (tests and diagnostics).
    pub fn set_state(&mut self, state: RobotState) {
        self.state = state;
    }

    /// Replaces the terrain field (its offsets included).
    pub fn set_terrain(&mut self, terrain: TerrainField) {
        self.terrain = terrain;
    }

    pub fn set_compliance(&mut self, compliance: [f64; 2]) {
        self.compliance = compliance;
    }

    fn resample_compliance(&mut self) {
        let range = self.config.randomization.compliance_range;
        self.compliance = match self.config.compliance_mode() {
            ComplianceMode::Rigid => [self.config.contact.time_constant; 2],
            ComplianceMode::Fixed(tc) => [tc; 2],
            ComplianceMode::Randomized => [
                sample_compliance(&mut self.rng, range),
                sample_compliance(&mut self.rng, range),
            ],
        };
    }

    /// Starts a new episode: half-sitting posture, phase 0, standing, fresh
    /// terrain offsets and compliance.
    pub fn reset(&mut self) -> Observation {
        self.steps = 0;
        self.clock = GaitClock::new(self.config.cycle_period);
        self.command = match self.config.commands {
            CommandSchedule::Fixed { standing_time, command } if standing_time <= 0.0 => command,
            _ => ModeCommand::STANDING,
        };
        self.switcher.clear();
        self.last_grf = [0.0; 2];

        self.model = if self.config.dynamics_randomized() {
            randomize_dynamics(
                &self.base_model,
                &mut self.rng,
                &self.config.randomization.dynamics_ranges,
            )
        } else {
            self.base_model.clone()
        };

        if let Some(z) = self.config.randomization.fixed_terrain_z {
            self.terrain.randomize(&self.config.terrain, &mut self.rng, false);
            self.terrain.z_offset = z;
        } else if self.config.terrain_randomized() {
            self.terrain.randomize(&self.config.terrain, &mut self.rng, false);
        }
        self.resample_compliance();

        let mut state = RobotState::nominal(&self.model, self.model.nominal_root_height);
        if self.config.init_noise > 0.0 {
            let n = self.config.init_noise;
            for (j, q) in state.q.iter_mut().enumerate() {
                let (lo, hi) = self.model.joint_limits(j);
                *q = (*q + self.rng.gen_range(-n..=n)).clamp(lo, hi);
            }
        }
        let kin = forward_kinematics(&self.model, &state);
        let clearance = kin
            .points
            .iter()
            .map(|p| self.terrain.height_at(p.pos[0]) - p.pos[1])
            .fold(f64::NEG_INFINITY, f64::max);
        state.root_pose[1] += clearance;
        self.state = state;
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let s = &self.state;
        let mut o = [0.0; OBS_DIM];
        o[0] = s.root_pose[2];
        o[1] = s.root_vel[2];
        o[2..8].copy_from_slice(&s.q);
        o[8..14].copy_from_slice(&s.qdot);
        o[14..20].copy_from_slice(&s.applied_torque);
        o[20..23].copy_from_slice(&self.command.mode.one_hot());
        o[23] = self.command.reference;
        let (sin, cos) = self.clock.signal();
        o[24] = sin;
        o[25] = cos;
        Observation(o)
    }

    /// One control step: joint targets from `action`, `substeps` physics
    /// substeps, reward, randomization events, phase advance and termination.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let dim = self.action_dim();
        if action.len() != dim {
            return Err(Error::Contract(format!(
                "action has {} values, expected {dim}",
                action.len()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Contract("action contains non-finite values".into()));
        }

        let mut q_des = [0.0; NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            let (lo, hi) = self.model.joint_limits(j);
            let a = action[j].clamp(-1.0, 1.0);
            q_des[j] = (self.model.nominal_posture[j] + self.config.action_scale * a).clamp(lo, hi);
        }
        let phase_action = if self.config.clock_control {
            MAX_PHASE_OFFSET * action[NUM_JOINTS].tanh()
        } else {
            0.0
        };

        let contact = self.compliance.map(|tc| ContactParams {
            time_constant: tc,
            ..self.config.contact
        });
        let d = self.config.contact_impedance;
        let mut forces = SubstepForces {
            q_des,
            terrain: &self.terrain,
            contact,
            contact_mass: d / (1.0 - d) * self.model.total_mass(),
            pd: [0.0; NUM_JOINTS],
            normal: [0.0; 2],
            tangential: [0.0; 2],
        };
        let dt = self.config.substep_dt();
        let mut torque_sum = [0.0; NUM_JOINTS];
        let mut normal_sum = [0.0; 2];
        let mut tangential_sum = [0.0; 2];
        let mut diverged = false;
        let mut state = self.state.clone();
        let mut done_substeps = 0u32;
        for _ in 0..self.config.substeps {
            match step_dynamics(&self.model, &state, &mut forces, dt) {
                Ok(next) => state = next,
                Err(Error::Diverged(_)) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            done_substeps += 1;
            for j in 0..NUM_JOINTS {
                torque_sum[j] += forces.pd[j];
            }
            for side in 0..2 {
                normal_sum[side] += forces.normal[side];
                tangential_sum[side] += forces.tangential[side];
            }
        }
        let n = f64::from(done_substeps.max(1));
        state.applied_torque = torque_sum.map(|t| t / n);
        let grf = normal_sum.map(|f| f / n);
        let grf_tangential = tangential_sum.map(|f| f / n);
        if !diverged {
            self.state = state;
        }
        self.last_grf = grf;

        let kin = forward_kinematics(&self.model, &self.state);
        let phase = phase_coefficients(&self.clock);
        let foot_speed = Side::BOTH.map(|side| {
            let (h, t) = (&kin.points[2 * side.index()], &kin.points[2 * side.index() + 1]);
            (0.5 * (h.vel[0] + t.vel[0])).hypot(0.5 * (h.vel[1] + t.vel[1]))
        });
        let inputs = RewardInputs {
            root_forward_vel: self.state.root_vel[0],
            root_height: self.state.root_pose[1],
            root_pitch: self.state.root_pose[2],
            q: self.state.q,
            qdot: self.state.qdot,
            foot_force: [0, 1].map(|i| grf[i].hypot(grf_tangential[i])),
            foot_speed,
        };
        let step_command = self.command;
        let (mut reward, breakdown) = compute_reward(
            &inputs,
            &step_command,
            &phase,
            &self.model.nominal_posture,
            self.model.nominal_root_height,
            &self.config.reward,
        );

        self.apply_events(&phase, grf);

        let step_phi = self.clock.phi();
        let (next_clock, phase_offset) = self.clock.advance(phase_action, self.config.clock_control);
        self.clock = next_clock;
        self.steps += 1;

        let termination = if diverged {
            Some(TerminationReason::Diverged)
        } else {
            match check_termination(&self.model, &self.state, &kin) {
                Some(TerminationReason::Diverged) => Some(TerminationReason::Diverged),
                Some(reason) if self.config.terminate => Some(reason),
                _ => None,
            }
        };
        if !reward.is_finite() {
            reward = 0.0;
        }
        let timeout = termination.is_none() && self.steps >= self.config.episode_steps;
        let done = termination.is_some() || timeout;

        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done,
            info: StepInfo {
                step: self.steps - 1,
                phi: step_phi,
                phase_action,
                phase_offset,
                command: step_command,
                breakdown,
                termination,
                timeout,
                grf,
                grf_tangential,
                root_pose: self.state.root_pose,
                root_vel: self.state.root_vel,
                compliance: self.compliance,
                terrain_offset: (self.terrain.x_offset, self.terrain.z_offset),
            },
        })
    }

    fn apply_events(&mut self, phase: &super::clock::PhaseCoefficients, grf: [f64; 2]) {
        let rate = self.config.control_rate;
        let r = self.config.randomization.clone();

        if self.config.compliance_mode() == ComplianceMode::Randomized
            && self.rng.gen_bool(event_probability(r.compliance_interval, rate))
        {
            self.resample_compliance();
        }
        if self.config.dynamics_randomized() && self.rng.gen_bool(event_probability(r.dynamics_interval, rate)) {
            self.model = randomize_dynamics(&self.base_model, &mut self.rng, &r.dynamics_ranges);
        }
        if self.config.terrain_randomized()
            && r.fixed_terrain_z.is_none()
            && self.rng.gen_bool(event_probability(r.terrain_interval, rate))
        {
            let both_loaded = grf[0] > 0.0 && grf[1] > 0.0;
            let gate = phase.in_double_support || both_loaded;
            self.terrain.randomize(&self.config.terrain, &mut self.rng, gate);
        }

        match self.config.commands {
            CommandSchedule::Random => {
                self.command = self.switcher.step(
                    &mut self.rng,
                    &self.clock,
                    self.command,
                    event_probability(r.mode_interval, rate),
                    r.forward_speed,
                );
            }
            CommandSchedule::Fixed { standing_time, command } => {
                let elapsed = f64::from(self.steps + 1) / rate;
                if self.command != command
                    && elapsed >= standing_time
                    && transition_allowed(self.command.mode, command.mode, &self.clock)
                {
                    self.command = command;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::TerrainConfig;
    use crate::env::config::CurriculumPhase;
    use crate::env::mode::Mode;
    use crate::sim::{build_planar_biped, ModelConfig};

    fn env(config: EnvConfig) -> BipedEnv {
        let model = build_planar_biped(&ModelConfig::default()).unwrap();
        let terrain = TerrainField::flat(&config.terrain);
        BipedEnv::new(config, model, terrain, 7).unwrap()
    }

    #[test]
    fn reset_state() {
        let mut e = env(EnvConfig::default());
        let obs = e.reset();
        assert_eq!(obs.clock(), (0.0, 1.0));
        assert_eq!(obs.mode_one_hot(), [0.0, 0.0, 1.0]);
        assert_eq!(e.state().q, e.model().nominal_posture);
        assert_eq!(obs.0.len(), OBS_DIM);
    }

    #[test]
    fn reset_noise_is_bounded() {
        let mut e = env(EnvConfig {
            init_noise: 0.005,
            ..Default::default()
        });
        e.reset();
        let nominal = e.model().nominal_posture;
        assert!(e.state().q != nominal);
        for (q, n) in e.state().q.iter().zip(nominal) {
            assert!((q - n).abs() <= 0.005);
        }
    }

    #[test]
    fn wrong_action_length_is_rejected() {
        let mut e = env(EnvConfig::default());
        assert!(matches!(e.step(&[0.0; 7]), Err(Error::Contract(_))));
        assert!(matches!(e.step(&[f64::NAN; 6]), Err(Error::Contract(_))));
        let mut cc = env(EnvConfig {
            clock_control: true,
            ..Default::default()
        });
        assert!(cc.step(&[0.0; 6]).is_err());
        assert!(cc.step(&[0.0; 7]).is_ok());
    }

    /// Default gains are too soft to hold the half-sitting pose open loop.
    fn stiff_model() -> RobotModel {
        let mut mc = ModelConfig::default();
        for j in [&mut mc.hip, &mut mc.knee, &mut mc.ankle] {
            j.kp *= 10.0;
            j.kd *= 10.0;
            j.torque_limit *= 4.0;
        }
        build_planar_biped(&mc).unwrap()
    }

    fn standing_env(model: RobotModel) -> BipedEnv {
        let cfg = EnvConfig {
            commands: CommandSchedule::Fixed {
                standing_time: 100.0,
                command: ModeCommand::STANDING,
            },
            ..Default::default()
        };
        let terrain = TerrainField::flat(&cfg.terrain);
        BipedEnv::new(cfg, model, terrain, 7).unwrap()
    }

    #[test]
    fn zero_action_falls_with_default_gains() {
        let mut e = standing_env(build_planar_biped(&ModelConfig::default()).unwrap());
        let mut steps = 0;
        loop {
            let out = e.step(&[0.0; 6]).unwrap();
            steps += 1;
            if out.done {
                assert_eq!(out.info.termination, Some(TerminationReason::Fall));
                break;
            }
        }
        assert!(steps < 200, "{steps}");
    }

    #[test]
    fn stiff_robot_stands_full_episode() {
        let mut e = standing_env(stiff_model());
        let mut steps = 0;
        loop {
            let out = e.step(&[0.0; 6]).unwrap();
            steps += 1;
            assert!(out.info.termination.is_none(), "terminated at {steps}: {:?}", out.info);
            assert!((0.0..=0.9 + 1e-12).contains(&out.reward));
            if out.done {
                assert!(out.info.timeout);
                break;
            }
        }
        assert_eq!(steps, 400);
    }

    #[test]
    fn fixed_clock_phase_sequence_is_rigid() {
        let mut e = standing_env(stiff_model());
        for t in 0..400u32 {
            let out = e.step(&[0.0; 6]).unwrap();
            assert_eq!(out.info.phi, t % 80);
        }
    }

    #[test]
    fn standing_load_matches_weight() {
        let mut e = standing_env(stiff_model());
        let mut last = None;
        for _ in 0..120 {
            last = Some(e.step(&[0.0; 6]).unwrap());
        }
        let info = last.unwrap().info;
        let weight = e.model().total_mass() * e.model().gravity;
        let total = info.grf[0] + info.grf[1];
        assert!((total / weight - 1.0).abs() < 0.02, "{total} vs {weight}");
        assert_eq!(info.command.mode, Mode::Standing);
    }

    #[test]
    fn random_actions_never_diverge() {
        let cfg = EnvConfig {
            phase: CurriculumPhase::Randomized,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = build_planar_biped(&ModelConfig::default()).unwrap();
        let terrain = TerrainField::generate(&cfg.terrain, &mut rng, 0.07);
        let mut e = BipedEnv::new(cfg, model, terrain, 9).unwrap();
        let mut episodes = 0;
        let mut steps = 0;
        while episodes < 20 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let out = e.step(&a).unwrap();
            steps += 1;
            assert_ne!(out.info.termination, Some(TerminationReason::Diverged));
            if out.done {
                episodes += 1;
                e.reset();
            }
        }
        // a random policy falls within a couple of seconds
        assert!((steps as f64 / 20.0) < 120.0, "{steps}");
    }

    #[test]
    fn terrain_is_frozen_in_double_support() {
        let mut cfg = EnvConfig {
            phase: CurriculumPhase::Randomized,
            ..Default::default()
        };
        cfg.randomization.terrain_interval = 0.025; // every step
        let model = build_planar_biped(&ModelConfig::default()).unwrap();
        let terrain = TerrainField::generate(&TerrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(1), 0.04);
        let mut e = BipedEnv::new(cfg, model, terrain, 3).unwrap();
        e.reset();
        for _ in 0..200 {
            let before = (e.terrain().x_offset, e.terrain().z_offset);
            let ds = phase_coefficients(&e.clock()).in_double_support;
            let out = e.step(&[0.0; 6]).unwrap();
            if ds && out.info.grf[0] > 0.0 && out.info.grf[1] > 0.0 {
                assert_eq!(out.info.terrain_offset, before);
            }
            if out.done {
                e.reset();
            }
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = EnvConfig {
            phase: CurriculumPhase::Randomized,
            ..Default::default()
        };
        let run = || {
            let model = build_planar_biped(&ModelConfig::default()).unwrap();
            let terrain = TerrainField::generate(&cfg.terrain, &mut ChaCha8Rng::seed_from_u64(2), 0.04);
            let mut e = BipedEnv::new(cfg.clone(), model, terrain, 11).unwrap();
            (0..100)
                .map(|k| {
                    let a = [0.1 * ((k % 7) as f64 - 3.0) / 3.0; 6];
                    e.step(&a).unwrap().info
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn big_actions_clamp_targets() {
        let mut e = env(EnvConfig::default());
        e.reset();
        // action 1 on the knee would put the target at -0.5 + 0.5 = 0.0 (the upper limit)
        let out = e.step(&[0.0, 50.0, 0.0, 0.0, 50.0, 0.0]).unwrap();
        assert!(out.obs.0.iter().all(|v| v.is_finite()));
        let (_, hi) = e.model().joint_limits(1);
        assert!(e.state().q[1] <= hi);
    }
}
