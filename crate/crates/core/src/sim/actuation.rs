//! Joint-level torque laws: the low-gain PD tracker and the joint friction model.

use serde::{Deserialize, Serialize};

/// Slip scale of the regularized dry-friction sign, rad/s.
pub const DRY_FRICTION_SLIP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrictionParams {
    pub viscous_damping: f64,
    pub dry_friction: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self {
            viscous_damping: 1.0,
            dry_friction: 3.0,
        }
    }
}

/// Regularized sign: `tanh(v / slip)`.
#[inline]
pub fn smooth_sign(v: f64, slip: f64) -> f64 {
    (v / slip).tanh()
}

/// `smooth_sign(v) / v`, the secant slope through the origin. Used as an
/// implicit damping coefficient it reproduces the friction force exactly at
/// the current velocity and can never reverse the motion within a step.
#[inline]
pub fn smooth_sign_secant(v: f64, slip: f64) -> f64 {
    let x = v / slip;
    if x.abs() < 1e-6 {
        1.0 / slip
    } else {
        x.tanh() / v
    }
}

/// `Kp (q_des - q) + Kd (0 - qdot)`, clamped to `±torque_limit`.
#[inline]
pub fn pd_torque(gains: PdGains, q_des: f64, q: f64, qdot: f64, torque_limit: f64) -> f64 {
    let raw = gains.kp * (q_des - q) - gains.kd * qdot;
    raw.clamp(-torque_limit, torque_limit)
}

/// Viscous plus regularized dry friction, always opposing `qdot`.
#[inline]
pub fn joint_friction(params: FrictionParams, qdot: f64) -> f64 {
    -(params.viscous_damping * qdot + params.dry_friction * smooth_sign(qdot, DRY_FRICTION_SLIP))
}

/// Damping coefficient handed to the implicit integrator for
/// [`joint_friction`]: `joint_friction(qdot) == -joint_friction_damping(qdot) * qdot`.
#[inline]
pub fn joint_friction_damping(params: FrictionParams, qdot: f64) -> f64 {
    params.viscous_damping + params.dry_friction * smooth_sign_secant(qdot, DRY_FRICTION_SLIP)
}
