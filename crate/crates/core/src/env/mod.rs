//! Clock-driven locomotion environment.

pub mod biped_env;
pub mod clock;
pub mod config;
pub mod mode;
pub mod randomize;
pub mod reward;
pub mod termination;
pub mod trace;

pub use biped_env::{BipedEnv, Observation, StepInfo, StepOutcome, OBS_DIM};
pub use clock::{phase_coefficients, GaitClock, PhaseCoefficients};
pub use config::{CommandSchedule, ComplianceMode, CurriculumPhase, EnvConfig, RandomizationConfig};
pub use mode::{Mode, ModeCommand};
pub use reward::{compute_reward, RewardBreakdown, RewardScales};
pub use termination::{check_termination, TerminationReason};
