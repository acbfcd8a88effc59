use serde::{Deserialize, Serialize};

use crate::sim::{Kinematics, RobotModel, RobotState};

/// Fraction of the nominal hip height below which the robot counts as fallen.
pub const FALL_HEIGHT_FRACTION: f64 = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationReason {
    Fall,
    Diverged,
    SelfCollision,
}

impl TerminationReason {
    pub fn name(self) -> &'static str {
        match self {
            TerminationReason::Fall => "fall",
            TerminationReason::Diverged => "diverged",
            TerminationReason::SelfCollision => "self_collision",
        }
    }
}

/// Early-termination test.
///
/// * `Diverged` for any non-finite state value.
/// * `Fall` when the hip is less than 60 % of its nominal height above the
///   lowest foot point.
/// * `SelfCollision` when a foot point is lifted above the hip.
pub fn check_termination(model: &RobotModel, state: &RobotState, kin: &Kinematics) -> Option<TerminationReason> {
    if !state.is_finite() {
        return Some(TerminationReason::Diverged);
    }
    let root_z = state.root_pose[1];
    let lowest = kin.points.iter().map(|p| p.pos[1]).fold(f64::INFINITY, f64::min);
    if root_z - lowest < FALL_HEIGHT_FRACTION * model.nominal_root_height {
        return Some(TerminationReason::Fall);
    }
    if kin.points.iter().any(|p| p.pos[1] > root_z) {
        return Some(TerminationReason::SelfCollision);
    }
    None
}
