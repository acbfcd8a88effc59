//! Planar articulated biped: model, kinematics, joint actuation and integration.

pub mod actuation;
pub mod dynamics;
pub mod kinematics;
pub mod model;
pub mod state;

pub use actuation::{joint_friction, pd_torque, smooth_sign, FrictionParams, PdGains};
pub use dynamics::{step_dynamics, ForceModel, Loads, PointLoad, SUBSTEP_DT};
pub use kinematics::{forward_kinematics, Kinematics, PointKinematics};
pub use model::{
    build_planar_biped, FootPoint, ModelConfig, RobotModel, Side, NUM_CONTACT_POINTS, NUM_DOF, NUM_JOINTS, NUM_LINKS,
};
pub use state::RobotState;
