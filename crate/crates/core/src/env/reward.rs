//! Clock-based locomotion reward.
//!
//! Every term is a Gaussian kernel `exp(-(err/σ)²)` in `[0, 1]`, weighted as
//! foot force 0.225, foot speed 0.225, forward velocity 0.1, root height 0.05,
//! upper body 0.1, nominal posture 0.1, joint velocities 0.1. There is no
//! turning term, so the total is at most 0.9.

use serde::{Deserialize, Serialize};

use super::clock::PhaseCoefficients;
use super::mode::{Mode, ModeCommand};
use crate::sim::NUM_JOINTS;

pub const WEIGHT_FOOT_FORCE: f64 = 0.225;
pub const WEIGHT_FOOT_SPEED: f64 = 0.225;
pub const WEIGHT_FORWARD_VELOCITY: f64 = 0.1;
pub const WEIGHT_ROOT_HEIGHT: f64 = 0.05;
pub const WEIGHT_UPPER_BODY: f64 = 0.1;
pub const WEIGHT_NOMINAL_POSTURE: f64 = 0.1;
pub const WEIGHT_JOINT_VELOCITIES: f64 = 0.1;

pub const MAX_REWARD: f64 = WEIGHT_FOOT_FORCE
    + WEIGHT_FOOT_SPEED
    + WEIGHT_FORWARD_VELOCITY
    + WEIGHT_ROOT_HEIGHT
    + WEIGHT_UPPER_BODY
    + WEIGHT_NOMINAL_POSTURE
    + WEIGHT_JOINT_VELOCITIES;

/// Kernel widths, one per term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardScales {
    pub foot_force: f64,
    pub foot_speed: f64,
    pub forward_velocity: f64,
    pub root_height: f64,
    pub upper_body: f64,
    pub nominal_posture: f64,
    pub joint_velocities: f64,
}

impl Default for RewardScales {
    fn default() -> Self {
        Self {
            foot_force: 200.0,
            foot_speed: 0.5,
            forward_velocity: 0.3,
            root_height: 0.05,
            upper_body: 0.2,
            nominal_posture: 0.5,
            joint_velocities: 4.0,
        }
    }
}

/// Unweighted term values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub foot_force: f64,
    pub foot_speed: f64,
    pub forward_velocity: f64,
    pub root_height: f64,
    pub upper_body: f64,
    pub nominal_posture: f64,
    pub joint_velocities: f64,
}

impl RewardBreakdown {
    pub const NAMES: [&'static str; 7] = [
        "foot_force",
        "foot_speed",
        "forward_velocity",
        "root_height",
        "upper_body",
        "nominal_posture",
        "joint_velocities",
    ];

    pub const WEIGHTS: [f64; 7] = [
        WEIGHT_FOOT_FORCE,
        WEIGHT_FOOT_SPEED,
        WEIGHT_FORWARD_VELOCITY,
        WEIGHT_ROOT_HEIGHT,
        WEIGHT_UPPER_BODY,
        WEIGHT_NOMINAL_POSTURE,
        WEIGHT_JOINT_VELOCITIES,
    ];

    pub fn terms(&self) -> [f64; 7] {
        [
            self.foot_force,
            self.foot_speed,
            self.forward_velocity,
            self.root_height,
            self.upper_body,
            self.nominal_posture,
            self.joint_velocities,
        ]
    }

    pub fn total(&self) -> f64 {
        self.terms().iter().zip(Self::WEIGHTS).map(|(t, w)| t * w).sum()
    }
}

/// Quantities the reward looks at after one control step.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardInputs {
    pub root_forward_vel: f64,
    pub root_height: f64,
    pub root_pitch: f64,
    pub q: [f64; NUM_JOINTS],
    pub qdot: [f64; NUM_JOINTS],
    /// Magnitude of each foot's ground reaction force `[right, left]`.
    pub foot_force: [f64; 2],
    /// Speed of each sole `[right, left]`.
    pub foot_speed: [f64; 2],
}

#[inline]
fn kernel(err: f64, scale: f64) -> f64 {
    let z = err / scale;
    (-z * z).exp()
}

fn norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Evaluates every reward term. Standing forces both feet into stance.
pub fn compute_reward(
    inputs: &RewardInputs,
    command: &ModeCommand,
    phase: &PhaseCoefficients,
    nominal_posture: &[f64; NUM_JOINTS],
    nominal_root_height: f64,
    scales: &RewardScales,
) -> (f64, RewardBreakdown) {
    let stance = if command.mode == Mode::Standing {
        [1.0, 1.0]
    } else {
        phase.by_side()
    };
    let swing_force: f64 = (0..2).map(|i| (1.0 - stance[i]) * inputs.foot_force[i]).sum();
    let stance_speed: f64 = (0..2).map(|i| stance[i] * inputs.foot_speed[i]).sum();
    let reference = match command.mode {
        Mode::Forward => command.reference,
        _ => 0.0,
    };
    let posture_err = norm((0..NUM_JOINTS).map(|j| inputs.q[j] - nominal_posture[j]));

    let b = RewardBreakdown {
        foot_force: kernel(swing_force, scales.foot_force),
        foot_speed: kernel(stance_speed, scales.foot_speed),
        forward_velocity: kernel(inputs.root_forward_vel - reference, scales.forward_velocity),
        root_height: kernel(inputs.root_height - nominal_root_height, scales.root_height),
        upper_body: kernel(inputs.root_pitch, scales.upper_body),
        nominal_posture: kernel(posture_err, scales.nominal_posture),
        joint_velocities: kernel(norm(inputs.qdot), scales.joint_velocities),
    };
    (b.total(), b)
}
