//! Environment configuration.

use serde::{Deserialize, Serialize};

use super::mode::ModeCommand;
use super::randomize::DynamicsRanges;
use super::reward::RewardScales;
use crate::contact::{ComplianceRange, ContactParams, TerrainConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumPhase {
    /// Flat rigid floor with mode switching only.
    Flat,
    /// Terrain, compliance and dynamics randomization enabled as configured.
    Randomized,
}

/// How foot compliance is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceMode {
    /// Every foot uses the default (stiffest) time constant.
    Rigid,
    /// Both feet use this time constant.
    Fixed(f64),
    /// Per-foot time constants resampled in-episode.
    Randomized,
}

/// Where commands come from during an episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSchedule {
    /// Start standing, switch randomly.
    Random,
    /// Stand for `standing_time` seconds, then hold `command`.
    Fixed { standing_time: f64, command: ModeCommand },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    pub mode_interval: f64,
    pub compliance_interval: f64,
    pub dynamics_interval: f64,
    pub terrain_interval: f64,
    pub terrain: bool,
    pub compliance: ComplianceMode,
    pub dynamics: bool,
    /// When set, the field keeps this z offset and is only shifted at reset.
    pub fixed_terrain_z: Option<f64>,
    pub compliance_range: ComplianceRange,
    pub dynamics_ranges: DynamicsRanges,
    pub forward_speed: (f64, f64),
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            mode_interval: 5.0,
            compliance_interval: 0.5,
            dynamics_interval: 0.5,
            terrain_interval: 5.0,
            terrain: true,
            compliance: ComplianceMode::Randomized,
            dynamics: true,
            fixed_terrain_z: None,
            compliance_range: ComplianceRange::default(),
            dynamics_ranges: DynamicsRanges::default(),
            forward_speed: (0.1, 0.4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub control_rate: f64,
    pub substeps: u32,
    pub episode_steps: u32,
    pub cycle_period: u32,
    /// Joint offset in rad for a unit action.
    pub action_scale: f64,
    pub clock_control: bool,
    pub phase: CurriculumPhase,
    /// Half-width of the uniform joint noise at reset, rad. 0 disables it.
    pub init_noise: f64,
    /// Terminate on falls; evaluation traces may chain episodes instead.
    pub terminate: bool,
    pub commands: CommandSchedule,
    /// Contact impedance `d`; the contact mass is scaled by `d / (1 - d)`.
    pub contact_impedance: f64,
    pub contact: ContactParams,
    pub randomization: RandomizationConfig,
    pub reward: RewardScales,
    pub terrain: TerrainConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            control_rate: 40.0,
            substeps: 25,
            episode_steps: 400,
            cycle_period: 80,
            action_scale: 0.5,
            clock_control: false,
            phase: CurriculumPhase::Flat,
            init_noise: 0.0,
            terminate: true,
            commands: CommandSchedule::Random,
            contact_impedance: 0.95,
            contact: ContactParams::default(),
            randomization: RandomizationConfig::default(),
            reward: RewardScales::default(),
            terrain: TerrainConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn substep_dt(&self) -> f64 {
        1.0 / (self.control_rate * f64::from(self.substeps))
    }

    /// Policy action dimension: six joint targets plus the phase offset with clock control.
    pub fn action_dim(&self) -> usize {
        crate::sim::NUM_JOINTS + usize::from(self.clock_control)
    }

    pub fn terrain_randomized(&self) -> bool {
        self.phase == CurriculumPhase::Randomized && self.randomization.terrain
    }

    pub fn dynamics_randomized(&self) -> bool {
        self.phase == CurriculumPhase::Randomized && self.randomization.dynamics
    }

    /// Compliance mode in effect; the flat phase is always rigid.
    pub fn compliance_mode(&self) -> ComplianceMode {
        match self.phase {
            CurriculumPhase::Flat => ComplianceMode::Rigid,
            CurriculumPhase::Randomized => self.randomization.compliance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dt = self.substep_dt();
        if !(self.control_rate > 0.0 && self.substeps > 0) {
            return Err(Error::Config("control_rate and substeps must be positive".into()));
        }
        if (dt - crate::sim::SUBSTEP_DT).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "control_rate * substeps must be 1000 Hz, got {}",
                self.control_rate * f64::from(self.substeps)
            )));
        }
        if self.cycle_period == 0 || self.episode_steps == 0 {
            return Err(Error::Config("cycle_period and episode_steps must be positive".into()));
        }
        if !(self.contact_impedance > 0.0 && self.contact_impedance < 1.0) {
            return Err(Error::Config("contact_impedance must lie in (0, 1)".into()));
        }
        let c = &self.contact;
        if !(c.time_constant > 0.0 && c.damping_ratio > 0.0 && c.friction_coeff >= 0.0) {
            return Err(Error::Config("invalid contact parameters".into()));
        }
        if let ComplianceMode::Fixed(tc) = self.randomization.compliance {
            if !(tc > 0.0) {
                return Err(Error::Config("fixed compliance must be positive".into()));
            }
        }
        let r = self.randomization.compliance_range;
        if !(r.min > 0.0 && r.min <= r.max) {
            return Err(Error::Config("invalid compliance range".into()));
        }
        let (lo, hi) = self.randomization.forward_speed;
        if !(lo <= hi) {
            return Err(Error::Config("invalid forward speed range".into()));
        }
        Ok(())
    }
}
