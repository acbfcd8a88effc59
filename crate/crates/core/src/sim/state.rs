use super::model::{RobotModel, NUM_DOF, NUM_JOINTS};

/// Instantaneous configuration of the biped.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotState {
    /// `(x, z, pitch)` of the hip point.
    pub root_pose: [f64; 3],
    pub root_vel: [f64; 3],
    pub q: [f64; NUM_JOINTS],
    pub qdot: [f64; NUM_JOINTS],
    /// PD torque averaged over the last control interval.
    pub applied_torque: [f64; NUM_JOINTS],
}

impl RobotState {
    /// Nominal posture with the hip at `root_height`, at rest.
    pub fn nominal(model: &RobotModel, root_height: f64) -> Self {
        Self {
            root_pose: [0.0, root_height, 0.0],
            root_vel: [0.0; 3],
            q: model.nominal_posture,
            qdot: [0.0; NUM_JOINTS],
            applied_torque: [0.0; NUM_JOINTS],
        }
    }

    pub fn positions(&self) -> [f64; NUM_DOF] {
        let mut out = [0.0; NUM_DOF];
        out[..3].copy_from_slice(&self.root_pose);
        out[3..].copy_from_slice(&self.q);
        out
    }

    pub fn velocities(&self) -> [f64; NUM_DOF] {
        let mut out = [0.0; NUM_DOF];
        out[..3].copy_from_slice(&self.root_vel);
        out[3..].copy_from_slice(&self.qdot);
        out
    }

    pub fn set_positions(&mut self, p: &[f64; NUM_DOF]) {
        self.root_pose.copy_from_slice(&p[..3]);
        self.q.copy_from_slice(&p[3..]);
    }

    pub fn set_velocities(&mut self, v: &[f64; NUM_DOF]) {
        self.root_vel.copy_from_slice(&v[..3]);
        self.qdot.copy_from_slice(&v[3..]);
    }

    pub fn is_finite(&self) -> bool {
        self.root_pose
            .iter()
            .chain(&self.root_vel)
            .chain(&self.q)
            .chain(&self.qdot)
            .chain(&self.applied_torque)
            .all(|v| v.is_finite())
    }
}
